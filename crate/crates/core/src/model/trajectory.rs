use nalgebra::{DMatrix, DVector};

use super::density::{log_sum_exp, Density, GaussianDensity, GaussianMixture};
use crate::error::{Error, Result};

pub type StateVector = DVector<f64>;

/// Where a trajectory came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Origin {
    pub model: String,
    pub seed: Option<u64>,
    pub burn_in: usize,
}

/// Uniformly sampled `N x K` time series, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dt: f64,
    k: usize,
    data: Vec<f64>,
    pub origin: Origin,
}

impl Trajectory {
    pub fn new(dt: f64, k: usize, data: Vec<f64>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Invalid(format!(
                "trajectory dt must be positive, got {dt}"
            )));
        }
        if k == 0 || data.len() % k != 0 {
            return Err(Error::Invalid(format!(
                "trajectory payload of {} values is not a multiple of K = {k}",
                data.len()
            )));
        }
        if data.len() / k < 2 {
            return Err(Error::Invalid("trajectory needs at least 2 samples".into()));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "non-finite value in trajectory row {}",
                i / k
            )));
        }
        Ok(Self {
            dt,
            k,
            data,
            origin: Origin::default(),
        })
    }

    pub fn with_origin(mut self, origin: Origin) -> Self {
        self.origin = origin;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.k)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Drops the first `n` samples.
    pub fn skip(&self, n: usize) -> Result<Self> {
        Self::new(self.dt, self.k, self.data[n * self.k..].to_vec())
            .map(|t| t.with_origin(self.origin.clone()))
    }
}

/// Sample mean and unbiased covariance of a trajectory.
#[derive(Debug, Clone)]
pub struct Moments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Set when the covariance is not positive-definite.
    pub degenerate: bool,
}

impl Moments {
    /// Quasi-Gaussian density with these moments.
    pub fn to_gaussian(&self) -> Result<GaussianDensity> {
        if self.degenerate {
            return Err(Error::Invalid(
                "trajectory covariance is degenerate; a quasi-Gaussian density cannot be fitted"
                    .into(),
            ));
        }
        GaussianDensity::new(self.mean.clone(), self.cov.clone())
    }
}

pub fn estimate_moments(traj: &Trajectory) -> Moments {
    let n = traj.len();
    let k = traj.dim();
    let mut mean = DVector::zeros(k);
    for row in traj.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(k, k);
    for row in traj.rows() {
        for i in 0..k {
            let di = row[i] - mean[i];
            for j in 0..=i {
                cov[(i, j)] += di * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..k {
        for j in 0..=i {
            let v = cov[(i, j)] / (n - 1) as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let scale = cov.diagonal().amax();
    let degenerate = !(scale > 0.0)
        || cov.clone().cholesky().is_none()
        || cov
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .any(|l| *l <= 1e-12 * scale);
    Moments {
        mean,
        cov,
        degenerate,
    }
}

/// Quasi-Gaussian approximation of the stationary density.
pub fn fit_quasi_gaussian(traj: &Trajectory) -> Result<GaussianDensity> {
    estimate_moments(traj).to_gaussian()
}

/// Expectation-maximization fit of an `n`-component Gaussian mixture to the
/// trajectory samples (every `stride`-th row).
///
/// Components are initialized at quantiles of the projection on the leading
/// principal axis, which makes the fit deterministic.
pub fn fit_gaussian_mixture(
    traj: &Trajectory,
    n: usize,
    stride: usize,
    max_iter: usize,
) -> Result<Density> {
    let moments = estimate_moments(traj);
    let base = moments.to_gaussian()?;
    if n <= 1 {
        return Ok(Density::Gaussian(base));
    }
    let k = traj.dim();
    let stride = stride.max(1);
    let xs: Vec<&[f64]> = traj.rows().step_by(stride).collect();
    if xs.len() < 10 * n {
        return Err(Error::Invalid("too few samples for a mixture fit".into()));
    }
    let eig = base.cov().clone().symmetric_eigen();
    let lead = eig.eigenvalues.imax();
    let axis = eig.eigenvectors.column(lead).into_owned();
    let mut proj: Vec<f64> = xs
        .iter()
        .map(|x| x.iter().zip(axis.iter()).map(|(a, b)| a * b).sum())
        .collect();
    proj.sort_by(|a, b| a.total_cmp(b));

    let reg = 1e-9 * base.cov().trace() / k as f64;
    let mut weights = vec![1.0 / n as f64; n];
    let mut comps: Vec<GaussianDensity> = (0..n)
        .map(|c| {
            let q = proj[((c as f64 + 0.5) / n as f64 * proj.len() as f64) as usize];
            let offset = q - axis.dot(base.mean());
            let mean = base.mean() + &axis * offset;
            GaussianDensity::new(mean, base.cov() / n as f64)
        })
        .collect::<Result<_>>()?;

    let m = xs.len();
    let mut resp = vec![0.0; m * n];
    let mut prev_ll = f64::NEG_INFINITY;
    for _ in 0..max_iter {
        let mut ll = 0.0;
        for (s, x) in xs.iter().enumerate() {
            let lp: Vec<f64> = (0..n)
                .map(|c| weights[c].ln() + comps[c].ln_pdf(x))
                .collect();
            let norm = log_sum_exp(lp.iter().copied());
            ll += norm;
            for c in 0..n {
                resp[s * n + c] = (lp[c] - norm).exp();
            }
        }
        let mut next = Vec::with_capacity(n);
        for c in 0..n {
            let nc: f64 = (0..m).map(|s| resp[s * n + c]).sum();
            if nc < 1e-8 * m as f64 {
                return Err(Error::Invalid(
                    "mixture component collapsed during fit".into(),
                ));
            }
            let mut mean = DVector::zeros(k);
            for (s, x) in xs.iter().enumerate() {
                let r = resp[s * n + c];
                for i in 0..k {
                    mean[i] += r * x[i];
                }
            }
            mean /= nc;
            let mut cov = DMatrix::zeros(k, k);
            for (s, x) in xs.iter().enumerate() {
                let r = resp[s * n + c];
                for i in 0..k {
                    for j in 0..k {
                        cov[(i, j)] += r * (x[i] - mean[i]) * (x[j] - mean[j]);
                    }
                }
            }
            cov /= nc;
            for i in 0..k {
                cov[(i, i)] += reg;
            }
            weights[c] = nc / m as f64;
            next.push(GaussianDensity::new(mean, cov)?);
        }
        comps = next;
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        if (ll - prev_ll).abs() <= 1e-10 * ll.abs().max(1.0) {
            break;
        }
        prev_ll = ll;
    }
    // renormalize so the weights pass the mixture's sum-to-one check
    let total: f64 = weights.iter().sum();
    let last = n - 1;
    weights.iter_mut().for_each(|w| *w /= total);
    weights[last] = 1.0 - weights[..last].iter().sum::<f64>();
    Ok(Density::Mixture(GaussianMixture::new(weights, comps)?))
}
