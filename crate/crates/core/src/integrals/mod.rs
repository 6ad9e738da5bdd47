//! The nu-integrals
//!
//! ```text
//! J(x)   = ∫ p0(x̂(x, z)) |∂x̂/∂x| nu(dz)
//! J_g(x) = ∫ g(x̂(x, z)) p0(x̂(x, z)) |∂x̂/∂x| nu(dz)
//! ```
//!
//! where `x̂` pulls `x` back through the affine jump. For Gaussian `p0`, `nu`
//! and bump-shaped `g` the z-integral is a Gaussian integral in closed form;
//! mixtures are handled term by term.
//!
//! Everything that does not depend on `x` is assembled once in
//! [`JumpIntegral::new`]; evaluation costs a few K-by-K products and a single
//! d-dimensional solve per mixture term.

mod quadrature;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

pub use quadrature::{eval_j_quadrature, gauss_hermite};

use crate::error::{check_dim, Error, Result};
use crate::model::{log_sum_exp, AffineJumpMap, Density, GaussianDensity, IntensityShape, JumpLaw};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Inputs of a jump integral. `shape: None` selects `J`, otherwise `J_g`.
#[derive(Debug, Clone)]
pub struct JumpIntegralSpec {
    pub p0: Density,
    pub map: AffineJumpMap,
    pub law: JumpLaw,
    pub shape: Option<IntensityShape>,
}

impl JumpIntegralSpec {
    pub fn new(
        p0: Density,
        map: AffineJumpMap,
        law: JumpLaw,
        shape: Option<IntensityShape>,
    ) -> Result<Self> {
        check_dim("jump map", p0.dim(), map.dim())?;
        check_dim("jump law", map.z_dim(), law.dim())?;
        if let Some(k) = shape.as_ref().and_then(IntensityShape::dim) {
            check_dim("intensity shape", p0.dim(), k)?;
        }
        Ok(Self {
            p0,
            map,
            law,
            shape,
        })
    }

    pub(crate) fn ln_shape(&self, x: &[f64]) -> f64 {
        self.shape.as_ref().map_or(0.0, |g| g.ln_value(x))
    }
}

/// One `(i, j, k)` term of the Gaussian closed form.
#[derive(Debug, Clone)]
struct GaussianTerm {
    /// `ln(weight) - K/2 ln 2π - ln|det(I+H)| - 1/2 (ln det C + ln det C_nu + ln det A)`.
    ln_const: f64,
    /// `P = C^{-1} (+ C_g^{-1})`.
    p: DMatrix<f64>,
    /// `B^T P`, with `B = (I+H)^{-1} H*`.
    bt_p: DMatrix<f64>,
    /// `q = C^{-1} m (+ C_g^{-1} m_g)`.
    q: DVector<f64>,
    /// `B^T q - C_nu^{-1} m_nu`.
    b0: DVector<f64>,
    /// `m^T C^{-1} m (+ m_g^T C_g^{-1} m_g) + m_nu^T C_nu^{-1} m_nu`.
    c0: f64,
    a: Cholesky<f64, Dyn>,
}

impl GaussianTerm {
    fn new(
        weight: f64,
        p0: &GaussianDensity,
        nu: &GaussianDensity,
        bump: Option<(&DMatrix<f64>, &DVector<f64>)>,
        map: &AffineJumpMap,
        b_mat: &DMatrix<f64>,
    ) -> Result<Self> {
        let k = p0.dim();
        let mut p = p0.precision().clone();
        let mut q = p0.precision() * p0.mean();
        let mut c0 = p0.mean().dot(&q);
        if let Some((g_prec, g_center)) = bump {
            p += g_prec;
            let qg = g_prec * g_center;
            c0 += g_center.dot(&qg);
            q += qg;
        }
        let nu_prec = nu.precision();
        let nu_q = nu_prec * nu.mean();
        c0 += nu.mean().dot(&nu_q);
        let bt_p = b_mat.transpose() * &p;
        let a_mat = &bt_p * b_mat + nu_prec;
        let a_mat = (&a_mat + a_mat.transpose()) * 0.5;
        let a = a_mat
            .clone()
            .cholesky()
            .ok_or(Error::NotSpd("jump-integral matrix A"))?;
        let ln_det_a = 2.0 * a.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let b0 = b_mat.transpose() * &q - nu_q;
        let ln_const = weight.ln()
            - 0.5 * k as f64 * LN_2PI
            - map.abs_det().ln()
            - 0.5 * (p0.ln_det() + nu.ln_det() + ln_det_a);
        Ok(Self {
            ln_const,
            p,
            bt_p,
            q,
            b0,
            c0,
            a,
        })
    }

    /// Log of the term at `x`, given `w = (I+H)^{-1}(h - x)`.
    fn ln_eval(&self, w: &DVector<f64>) -> f64 {
        let pw = &self.p * w;
        let b = &self.bt_p * w + &self.b0;
        let c = w.dot(&pw) + 2.0 * w.dot(&self.q) + self.c0;
        let ainv_b = self.a.solve(&b);
        self.ln_const + 0.5 * (b.dot(&ainv_b) - c)
    }
}

/// Which evaluation route an integral uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Sum over atoms (also used when `H* = 0`, where `nu` integrates out).
    Discrete,
    /// Closed-form Gaussian integral per mixture term.
    Gaussian,
}

/// An assembled, reusable jump integral.
#[derive(Debug, Clone)]
pub struct JumpIntegral {
    spec: JumpIntegralSpec,
    route: Route,
    /// `(ln gamma_j, h + H* z_j)` for the discrete route.
    atoms: Vec<(f64, Vec<f64>)>,
    terms: Vec<GaussianTerm>,
    /// Number of p0 / nu / g components, for precondition checks.
    counts: (usize, usize, usize),
}

impl JumpIntegral {
    pub fn new(spec: JumpIntegralSpec) -> Result<Self> {
        let map = &spec.map;
        let mut atoms = Vec::new();
        let mut terms = Vec::new();
        let p0_mix = spec.p0.to_mixture();
        let n_shape = match spec.shape.as_ref().and_then(IntensityShape::bumps) {
            Some(b) => b.len(),
            None => 1,
        };
        let route;
        let n_law;
        match (&spec.law, map.is_z_free()) {
            (JumpLaw::Discrete { atoms: zs, probs }, _) => {
                route = Route::Discrete;
                n_law = zs.len();
                for (z, g) in zs.iter().zip(probs) {
                    atoms.push((g.ln(), map.offset(z.as_slice())?.as_slice().to_vec()));
                }
            }
            (_, true) => {
                route = Route::Discrete;
                n_law = 1;
                atoms.push((0.0, map.h().as_slice().to_vec()));
            }
            (law, false) => {
                route = Route::Gaussian;
                let nu_mix = law.gaussian_components().expect("non-discrete law");
                n_law = nu_mix.components().len();
                let b_mat = map.inverse_linear() * map.h_star();
                let bumps: Vec<(f64, Option<(&DMatrix<f64>, &DVector<f64>)>)> =
                    match spec.shape.as_ref().and_then(IntensityShape::bumps) {
                        None => vec![(1.0, None)],
                        Some(bs) => bs
                            .into_iter()
                            .map(|(w, b)| (w, Some((b.precision(), b.center()))))
                            .collect(),
                    };
                for (beta, c_p0) in p0_mix.iter() {
                    for (gamma, c_nu) in nu_mix.iter() {
                        for (xi, bump) in &bumps {
                            terms.push(GaussianTerm::new(
                                beta * gamma * xi,
                                c_p0,
                                c_nu,
                                *bump,
                                map,
                                &b_mat,
                            )?);
                        }
                    }
                }
            }
        }
        let counts = (p0_mix.components().len(), n_law, n_shape);
        Ok(Self {
            spec,
            route,
            atoms,
            terms,
            counts,
        })
    }

    pub fn spec(&self) -> &JumpIntegralSpec {
        &self.spec
    }

    pub fn route(&self) -> Route {
        self.route
    }

    pub fn dim(&self) -> usize {
        self.spec.p0.dim()
    }

    /// `ln J(x)` (or `ln J_g(x)`) by the assembled route.
    pub fn ln_eval(&self, x: &[f64]) -> f64 {
        match self.route {
            Route::Discrete => self.ln_eval_discrete(x),
            Route::Gaussian => self.ln_eval_gaussian(x),
        }
    }

    /// Value at `x`; errors on a dimension mismatch.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim("jump-integral argument", self.dim(), x.len())?;
        Ok(self.ln_eval(x).exp())
    }

    fn ln_eval_discrete(&self, x: &[f64]) -> f64 {
        let map = &self.spec.map;
        let ln_jac = -map.abs_det().ln();
        let mut xhat = vec![0.0; x.len()];
        let terms = self.atoms.iter().map(|(ln_gamma, offset)| {
            map.invert_with_offset(x, offset, &mut xhat);
            ln_gamma + self.spec.p0.ln_pdf(&xhat) + self.spec.ln_shape(&xhat) + ln_jac
        });
        if self.atoms.len() == 1 {
            return terms.into_iter().next().unwrap();
        }
        log_sum_exp(terms)
    }

    fn ln_eval_gaussian(&self, x: &[f64]) -> f64 {
        let map = &self.spec.map;
        let diff = DVector::from_iterator(x.len(), map.h().iter().zip(x).map(|(h, x)| h - x));
        let w = map.inverse_linear() * diff;
        if self.terms.len() == 1 {
            return self.terms[0].ln_eval(&w);
        }
        log_sum_exp(self.terms.iter().map(|t| t.ln_eval(&w)))
    }

    /// Sum over the atoms of a discrete law.
    pub fn eval_discrete(&self, x: &[f64]) -> Result<f64> {
        if !matches!(self.spec.law, JumpLaw::Discrete { .. }) {
            return Err(Error::Invalid(
                "eval_discrete needs a discrete jump law".into(),
            ));
        }
        check_dim("jump-integral argument", self.dim(), x.len())?;
        Ok(self.ln_eval_discrete(x).exp())
    }

    fn require_closed_form(
        &self,
        what: &str,
        max: (usize, usize, usize),
        bump: bool,
    ) -> Result<()> {
        if self.route != Route::Gaussian {
            return Err(Error::Invalid(format!(
                "{what} needs a Gaussian jump law with H* != 0"
            )));
        }
        let (p, q, t) = self.counts;
        if p > max.0 || q > max.1 || t > max.2 {
            return Err(Error::Invalid(format!("{what} does not accept mixtures")));
        }
        let has_bump = matches!(
            self.spec.shape,
            Some(IntensityShape::Bump(_)) | Some(IntensityShape::BumpMixture { .. })
        );
        if has_bump != bump && max.2 == 1 {
            return Err(Error::Invalid(format!(
                "{what} {} an intensity bump",
                if bump { "needs" } else { "does not take" }
            )));
        }
        Ok(())
    }

    /// Closed form for Gaussian `p0` and Gaussian `nu`, without `g`.
    pub fn eval_gaussian(&self, x: &[f64]) -> Result<f64> {
        self.require_closed_form("eval_gaussian", (1, 1, 1), false)?;
        if matches!(self.spec.p0, Density::Mixture(_))
            || matches!(self.spec.law, JumpLaw::Mixture(_))
        {
            return Err(Error::Invalid(
                "eval_gaussian does not accept mixtures".into(),
            ));
        }
        self.eval(x)
    }

    /// Closed form for Gaussian `p0`, Gaussian `nu` and a single bump `g`.
    pub fn eval_gaussian_bump(&self, x: &[f64]) -> Result<f64> {
        self.require_closed_form("eval_gaussian_bump", (1, 1, 1), true)?;
        if !matches!(self.spec.shape, Some(IntensityShape::Bump(_)))
            || matches!(self.spec.p0, Density::Mixture(_))
            || matches!(self.spec.law, JumpLaw::Mixture(_))
        {
            return Err(Error::Invalid(
                "eval_gaussian_bump needs single Gaussians and one bump".into(),
            ));
        }
        self.eval(x)
    }

    /// Closed form summed over all mixture terms.
    pub fn eval_mixture(&self, x: &[f64]) -> Result<f64> {
        self.require_closed_form("eval_mixture", (usize::MAX, usize::MAX, usize::MAX), false)?;
        self.eval(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GaussianBump, GaussianMixture};

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn phi(x: f64) -> f64 {
        (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }

    fn std_p0() -> Density {
        GaussianDensity::standard(1).unwrap().into()
    }

    #[test]
    fn single_atom_is_deterministic_shift() {
        let map = AffineJumpMap::shift(v(&[1.0])).unwrap();
        let spec = JumpIntegralSpec::new(std_p0(), map, JumpLaw::none(), None).unwrap();
        let j = JumpIntegral::new(spec).unwrap();
        for x in [-1.0, 0.0, 0.3, 2.5] {
            assert!((j.eval_discrete(&[x]).unwrap() - phi(x - 1.0)).abs() < 1e-16);
        }
    }

    #[test]
    fn symmetric_atoms() {
        let map =
            AffineJumpMap::new(v(&[0.0]), DMatrix::zeros(1, 1), DMatrix::identity(1, 1)).unwrap();
        let law = JumpLaw::discrete(vec![v(&[1.0]), v(&[-1.0])], vec![0.5, 0.5]).unwrap();
        let j =
            JumpIntegral::new(JumpIntegralSpec::new(std_p0(), map, law, None).unwrap()).unwrap();
        let val = j.eval_discrete(&[0.0]).unwrap();
        assert!((val - phi(1.0)).abs() < 1e-16);
        assert!((val - 0.241_970_7).abs() < 1e-7);
    }

    #[test]
    fn constant_shape_is_identity() {
        let map = AffineJumpMap::new(
            v(&[0.2]),
            DMatrix::from_element(1, 1, 0.1),
            DMatrix::identity(1, 1),
        )
        .unwrap();
        let law = JumpLaw::discrete(vec![v(&[1.0]), v(&[-0.5])], vec![0.3, 0.7]).unwrap();
        let a = JumpIntegral::new(
            JumpIntegralSpec::new(std_p0(), map.clone(), law.clone(), None).unwrap(),
        )
        .unwrap();
        let b = JumpIntegral::new(
            JumpIntegralSpec::new(std_p0(), map, law, Some(IntensityShape::Constant)).unwrap(),
        )
        .unwrap();
        for x in [-2.0, 0.0, 1.7] {
            assert_eq!(a.ln_eval(&[x]), b.ln_eval(&[x]));
        }
    }

    #[test]
    fn convolution_of_standard_normals() {
        let map =
            AffineJumpMap::new(v(&[0.0]), DMatrix::zeros(1, 1), DMatrix::identity(1, 1)).unwrap();
        let law = JumpLaw::Gaussian(GaussianDensity::standard(1).unwrap());
        let j =
            JumpIntegral::new(JumpIntegralSpec::new(std_p0(), map, law, None).unwrap()).unwrap();
        assert_eq!(j.route(), Route::Gaussian);
        let val = j.eval_gaussian(&[0.0]).unwrap();
        assert!((val - 1.0 / (4.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert!((val - 0.282_094_8).abs() < 1e-7);
        // N(0, 2) elsewhere
        let x = 1.3;
        let n02 = (-x * x / 4.0f64).exp() / (4.0 * std::f64::consts::PI).sqrt();
        assert!((j.eval_gaussian(&[x]).unwrap() - n02).abs() < 1e-15);
    }

    #[test]
    fn small_coupling_matches_collapsed_law() {
        let eps = 1e-6;
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.6]);
        let p0: Density = GaussianDensity::new(v(&[0.1, -0.2]), cov).unwrap().into();
        let hm = DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.1, -0.1]);
        let nu = GaussianDensity::new(v(&[0.5, 1.0]), DMatrix::identity(2, 2)).unwrap();
        let map = AffineJumpMap::new(v(&[0.4, 0.0]), hm, DMatrix::identity(2, 2) * eps).unwrap();
        let full = JumpIntegral::new(
            JumpIntegralSpec::new(p0.clone(), map.clone(), JumpLaw::Gaussian(nu.clone()), None)
                .unwrap(),
        )
        .unwrap();
        let collapsed = JumpIntegral::new(
            JumpIntegralSpec::new(p0, map, JumpLaw::point(nu.mean().clone()), None).unwrap(),
        )
        .unwrap();
        for x in [[0.0, 0.0], [1.0, -0.5], [-0.7, 0.9]] {
            let a = full.eval_gaussian(&x).unwrap();
            let b = collapsed.eval_discrete(&x).unwrap();
            assert!((a - b).abs() < 1e-4 * b);
        }
    }

    #[test]
    fn wide_bump_recovers_plain_integral() {
        let p0: Density = GaussianDensity::univariate(0.2, 0.8).unwrap().into();
        let map = AffineJumpMap::new(
            v(&[0.5]),
            DMatrix::from_element(1, 1, 0.3),
            DMatrix::from_element(1, 1, 0.7),
        )
        .unwrap();
        let law = JumpLaw::Gaussian(GaussianDensity::univariate(-0.3, 0.5).unwrap());
        let wide = GaussianBump::new(v(&[0.0]), DMatrix::from_element(1, 1, 1e8)).unwrap();
        let jg = JumpIntegral::new(
            JumpIntegralSpec::new(
                p0.clone(),
                map.clone(),
                law.clone(),
                Some(IntensityShape::Bump(wide)),
            )
            .unwrap(),
        )
        .unwrap();
        let j = JumpIntegral::new(JumpIntegralSpec::new(p0, map, law, None).unwrap()).unwrap();
        for x in [-1.0, 0.0, 0.4, 1.5] {
            let a = jg.eval_gaussian_bump(&[x]).unwrap();
            let b = j.eval_gaussian(&[x]).unwrap();
            assert!((a - b).abs() < 1e-6 * b);
        }
    }

    #[test]
    fn far_bump_suppresses() {
        let p0: Density = GaussianDensity::standard(1).unwrap().into();
        let map =
            AffineJumpMap::new(v(&[0.5]), DMatrix::zeros(1, 1), DMatrix::identity(1, 1)).unwrap();
        let law = JumpLaw::Gaussian(GaussianDensity::univariate(0.0, 0.25).unwrap());
        let far = GaussianBump::new(v(&[12.0]), DMatrix::identity(1, 1)).unwrap();
        let jg = JumpIntegral::new(
            JumpIntegralSpec::new(
                p0.clone(),
                map.clone(),
                law.clone(),
                Some(IntensityShape::Bump(far)),
            )
            .unwrap(),
        )
        .unwrap();
        let j = JumpIntegral::new(JumpIntegralSpec::new(p0, map, law, None).unwrap()).unwrap();
        for x in [-1.0, 0.0, 1.0] {
            assert!(jg.eval(&[x]).unwrap() < 1e-10 * j.eval(&[x]).unwrap());
        }
    }

    #[test]
    fn mixture_route_preconditions_and_weights() {
        let c1 = GaussianDensity::univariate(-1.0, 0.5).unwrap();
        let c2 = GaussianDensity::univariate(1.0, 0.7).unwrap();
        let map =
            AffineJumpMap::new(v(&[0.2]), DMatrix::zeros(1, 1), DMatrix::identity(1, 1)).unwrap();
        let law = JumpLaw::Gaussian(GaussianDensity::univariate(0.1, 0.4).unwrap());

        let one = GaussianMixture::new(vec![1.0, 0.0], vec![c1.clone(), c2.clone()]).unwrap();
        let lone: Density = c1.clone().into();
        let a = JumpIntegral::new(
            JumpIntegralSpec::new(one.into(), map.clone(), law.clone(), None).unwrap(),
        )
        .unwrap();
        let b =
            JumpIntegral::new(JumpIntegralSpec::new(lone, map.clone(), law.clone(), None).unwrap())
                .unwrap();
        assert!(a.eval_gaussian(&[0.0]).is_err());
        for x in [-1.0, 0.3, 2.0] {
            assert_eq!(
                a.eval_mixture(&[x]).unwrap(),
                b.eval_gaussian(&[x]).unwrap()
            );
        }

        let single = GaussianMixture::single(c1);
        let m = JumpIntegral::new(
            JumpIntegralSpec::new(single.into(), map.clone(), law.clone(), None).unwrap(),
        )
        .unwrap();
        assert_eq!(
            m.eval_mixture(&[0.4]).unwrap(),
            b.eval_gaussian(&[0.4]).unwrap()
        );

        let shift = AffineJumpMap::shift(v(&[1.0])).unwrap();
        let disc = JumpIntegral::new(
            JumpIntegralSpec::new(std_p0(), shift, JumpLaw::none(), None).unwrap(),
        )
        .unwrap();
        assert!(disc.eval_mixture(&[0.0]).is_err());
    }

    #[test]
    fn zero_coupling_routes_to_shift() {
        let law = JumpLaw::Gaussian(GaussianDensity::univariate(3.0, 2.0).unwrap());
        let map =
            AffineJumpMap::new(v(&[1.0]), DMatrix::zeros(1, 1), DMatrix::zeros(1, 1)).unwrap();
        let j =
            JumpIntegral::new(JumpIntegralSpec::new(std_p0(), map, law, None).unwrap()).unwrap();
        assert_eq!(j.route(), Route::Discrete);
        assert!((j.eval(&[0.5]).unwrap() - phi(-0.5)).abs() < 1e-16);
    }
}
