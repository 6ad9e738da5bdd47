//! Gaussian densities and finite Gaussian mixtures.
//!
//! Every density factors its covariance once at construction; evaluation
//! afterwards is a single triangular solve per component and never fails.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;
const SYMMETRY_TOL: f64 = 1e-12;
pub(crate) const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Multivariate normal density `N(mean, cov)` with a cached Cholesky factor.
#[derive(Debug, Clone)]
pub struct GaussianDensity {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    /// Lower Cholesky factor, row-major, for allocation-light solves.
    chol_rows: Vec<f64>,
    chol: DMatrix<f64>,
    precision: DMatrix<f64>,
    ln_det: f64,
}

impl GaussianDensity {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let k = mean.len();
        if k == 0 {
            return Err(Error::Invalid("Gaussian density of dimension 0".into()));
        }
        check_dim("covariance rows", k, cov.nrows())?;
        check_dim("covariance columns", k, cov.ncols())?;
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite Gaussian parameter".into()));
        }
        let scale = cov.amax().max(f64::MIN_POSITIVE);
        for i in 0..k {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::NotSpd("Gaussian density (asymmetric)"));
                }
            }
        }
        let sym = (&cov + cov.transpose()) * 0.5;
        let chol = sym
            .clone()
            .cholesky()
            .ok_or(Error::NotSpd("Gaussian density"))?;
        let l = chol.l();
        let ln_det = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let precision = chol.inverse();
        let mut chol_rows = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                chol_rows.push(l[(i, j)]);
            }
        }
        Ok(Self {
            mean,
            cov: sym,
            chol_rows,
            chol: l,
            precision,
            ln_det,
        })
    }

    /// Scalar convenience constructor.
    pub fn univariate(mean: f64, var: f64) -> Result<Self> {
        Self::new(
            DVector::from_element(1, mean),
            DMatrix::from_element(1, 1, var),
        )
    }

    pub fn standard(k: usize) -> Result<Self> {
        Self::new(DVector::zeros(k), DMatrix::identity(k, k))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    /// Lower Cholesky factor of the covariance.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// `ln det C`.
    pub fn ln_det(&self) -> f64 {
        self.ln_det
    }

    /// Mahalanobis form `(x-m)^T C^{-1} (x-m)`.
    pub fn mahalanobis(&self, x: &[f64]) -> f64 {
        let k = self.dim();
        debug_assert_eq!(x.len(), k);
        let mut y = [0.0f64; 16];
        let mut heap;
        let y: &mut [f64] = if k <= 16 {
            &mut y[..k]
        } else {
            heap = vec![0.0; k];
            &mut heap
        };
        let mut quad = 0.0;
        for i in 0..k {
            let row = &self.chol_rows[i * k..i * k + i];
            let mut acc = x[i] - self.mean[i];
            for (lij, yj) in row.iter().zip(y.iter()) {
                acc -= lij * yj;
            }
            let yi = acc / self.chol_rows[i * k + i];
            y[i] = yi;
            quad += yi * yi;
        }
        quad
    }

    pub fn ln_pdf(&self, x: &[f64]) -> f64 {
        -0.5 * (self.dim() as f64 * LN_2PI + self.ln_det + self.mahalanobis(x))
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let xi = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + &self.chol * xi
    }
}

/// Weighted sum of Gaussian densities with weights summing to one.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    components: Vec<GaussianDensity>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, components: Vec<GaussianDensity>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::Invalid(format!(
                "mixture needs matching non-empty weights and components ({} vs {})",
                weights.len(),
                components.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Invalid("mixture weights must be nonnegative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Invalid(format!(
                "mixture weights sum to {sum}, expected 1"
            )));
        }
        let k = components[0].dim();
        for c in &components[1..] {
            check_dim("mixture component", k, c.dim())?;
        }
        Ok(Self {
            weights,
            components,
        })
    }

    pub fn single(component: GaussianDensity) -> Self {
        Self {
            weights: vec![1.0],
            components: vec![component],
        }
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[GaussianDensity] {
        &self.components
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &GaussianDensity)> {
        self.weights.iter().copied().zip(self.components.iter())
    }

    pub fn ln_pdf(&self, x: &[f64]) -> f64 {
        if self.components.len() == 1 {
            return self.components[0].ln_pdf(x);
        }
        log_sum_exp(self.iter().map(|(w, c)| w.ln() + c.ln_pdf(x)))
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn mean(&self) -> DVector<f64> {
        self.iter()
            .fold(DVector::zeros(self.dim()), |acc, (w, c)| acc + c.mean() * w)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let i = pick_index(&self.weights, rng);
        self.components[i].sample(rng)
    }
}

/// Stationary-density approximations accepted by the estimators.
#[derive(Debug, Clone)]
pub enum Density {
    Gaussian(GaussianDensity),
    Mixture(GaussianMixture),
}

impl Density {
    pub fn dim(&self) -> usize {
        match self {
            Density::Gaussian(g) => g.dim(),
            Density::Mixture(m) => m.dim(),
        }
    }

    pub fn ln_pdf(&self, x: &[f64]) -> f64 {
        match self {
            Density::Gaussian(g) => g.ln_pdf(x),
            Density::Mixture(m) => m.ln_pdf(x),
        }
    }

    /// Density value; errors on a dimension mismatch.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim("density argument", self.dim(), x.len())?;
        Ok(self.ln_pdf(x).exp())
    }

    /// View as a mixture (a lone Gaussian becomes a one-component mixture).
    pub fn to_mixture(&self) -> GaussianMixture {
        match self {
            Density::Gaussian(g) => GaussianMixture::single(g.clone()),
            Density::Mixture(m) => m.clone(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        match self {
            Density::Gaussian(g) => g.sample(rng),
            Density::Mixture(m) => m.sample(rng),
        }
    }
}

impl From<GaussianDensity> for Density {
    fn from(g: GaussianDensity) -> Self {
        Density::Gaussian(g)
    }
}

impl From<GaussianMixture> for Density {
    fn from(m: GaussianMixture) -> Self {
        Density::Mixture(m)
    }
}

pub fn log_sum_exp<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let terms: Vec<f64> = terms.into_iter().collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max == f64::INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

pub(crate) fn pick_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the cumulative sum
    probs
        .iter()
        .rposition(|p| *p > 0.0)
        .unwrap_or(probs.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn standard_normal_peak() {
        let g = GaussianDensity::univariate(0.0, 1.0).unwrap();
        assert!((g.pdf(&[0.0]) - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn value_at_mean_is_normalizer() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.5]);
        let g = GaussianDensity::new(DVector::from_vec(vec![1.0, -2.0]), cov.clone()).unwrap();
        let expect = 1.0 / ((2.0 * std::f64::consts::PI).powi(2) * cov.determinant()).sqrt();
        assert!((g.pdf(&[1.0, -2.0]) - expect).abs() < 1e-14);
    }

    #[test]
    fn symmetric_mixture_at_origin() {
        let m = GaussianMixture::new(
            vec![0.5, 0.5],
            vec![
                GaussianDensity::univariate(-1.0, 1.0).unwrap(),
                GaussianDensity::univariate(1.0, 1.0).unwrap(),
            ],
        )
        .unwrap();
        let phi1 = (-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((m.pdf(&[0.0]) - phi1).abs() < 1e-15);
        assert!((phi1 - 0.241_970_7).abs() < 1e-7);
    }

    #[test]
    fn single_component_mixture_matches_component() {
        let g = GaussianDensity::new(
            DVector::from_vec(vec![0.2, 0.1]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.7]),
        )
        .unwrap();
        let m = GaussianMixture::single(g.clone());
        for x in [[0.0, 0.0], [1.5, -2.0], [3.0, 0.4]] {
            assert_eq!(m.ln_pdf(&x), g.ln_pdf(&x));
        }
    }

    #[test]
    fn rejects_non_spd_and_asymmetric() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            GaussianDensity::new(DVector::zeros(2), bad),
            Err(Error::NotSpd(_))
        ));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(GaussianDensity::new(DVector::zeros(2), asym).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let d = Density::from(GaussianDensity::standard(2).unwrap());
        assert!(matches!(d.eval(&[0.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn mixture_weights_validated() {
        let c = || GaussianDensity::standard(1).unwrap();
        assert!(GaussianMixture::new(vec![0.5, 0.6], vec![c(), c()]).is_err());
        assert!(GaussianMixture::new(vec![1.0, 0.0], vec![c(), c()]).is_ok());
    }

    #[test]
    fn sampling_matches_moments() {
        let g = GaussianDensity::univariate(2.0, 4.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|_| g.sample(&mut rng)[0]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 3.0 * 2.0 / (n as f64).sqrt());
    }
}
