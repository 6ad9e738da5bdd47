//! Conditional jump-time intensity `alpha * eta(t) * g(x)`.

use nalgebra::{DMatrix, DVector};

use super::density::{log_sum_exp, GaussianDensity};
use crate::error::{Error, Result};

/// Time profile `eta(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeProfile {
    Constant(f64),
    /// Piecewise-linear interpolation of `(t, eta)` knots; held constant
    /// outside the table.
    Table(Vec<(f64, f64)>),
}

impl TimeProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            TimeProfile::Constant(v) => {
                if !(v.is_finite() && *v > 0.0) {
                    return Err(Error::Invalid(format!("eta must be positive, got {v}")));
                }
            }
            TimeProfile::Table(pts) => {
                if pts.is_empty() {
                    return Err(Error::Invalid("eta table is empty".into()));
                }
                if pts.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return Err(Error::Invalid("eta table times must increase".into()));
                }
                if pts
                    .iter()
                    .any(|(t, v)| !(t.is_finite() && v.is_finite() && *v > 0.0))
                {
                    return Err(Error::Invalid(
                        "eta table values must be finite and positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Constant(v) => *v,
            TimeProfile::Table(pts) => {
                let first = pts[0];
                let last = pts[pts.len() - 1];
                if t <= first.0 {
                    return first.1;
                }
                if t >= last.0 {
                    return last.1;
                }
                let i = pts.partition_point(|(ti, _)| *ti <= t);
                let (t0, v0) = pts[i - 1];
                let (t1, v1) = pts[i];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            TimeProfile::Constant(v) => *v,
            TimeProfile::Table(pts) => pts.iter().map(|p| p.1).fold(f64::MIN, f64::max),
        }
    }
}

/// `g(x) = exp(-1/2 (x - m)^T C^{-1} (x - m))`, peaking at 1.
#[derive(Debug, Clone)]
pub struct GaussianBump {
    shape: GaussianDensity,
}

impl GaussianBump {
    pub fn new(center: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        Ok(Self {
            shape: GaussianDensity::new(center, cov)?,
        })
    }

    pub fn center(&self) -> &DVector<f64> {
        self.shape.mean()
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        self.shape.cov()
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        self.shape.precision()
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn ln_value(&self, x: &[f64]) -> f64 {
        -0.5 * self.shape.mahalanobis(x)
    }
}

/// State weight `g(x)` of the intensity.
#[derive(Debug, Clone)]
pub enum IntensityShape {
    Constant,
    Bump(GaussianBump),
    BumpMixture {
        weights: Vec<f64>,
        bumps: Vec<GaussianBump>,
    },
}

impl IntensityShape {
    pub fn bump_mixture(weights: Vec<f64>, bumps: Vec<GaussianBump>) -> Result<Self> {
        if weights.is_empty() || weights.len() != bumps.len() {
            return Err(Error::Invalid(
                "bump mixture needs matching weights and bumps".into(),
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Invalid(
                "bump mixture weights must be positive".into(),
            ));
        }
        Ok(IntensityShape::BumpMixture { weights, bumps })
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            IntensityShape::Constant => None,
            IntensityShape::Bump(b) => Some(b.dim()),
            IntensityShape::BumpMixture { bumps, .. } => Some(bumps[0].dim()),
        }
    }

    pub fn ln_value(&self, x: &[f64]) -> f64 {
        match self {
            IntensityShape::Constant => 0.0,
            IntensityShape::Bump(b) => b.ln_value(x),
            IntensityShape::BumpMixture { weights, bumps } => log_sum_exp(
                weights
                    .iter()
                    .zip(bumps)
                    .map(|(w, b)| w.ln() + b.ln_value(x)),
            ),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            IntensityShape::Constant => 1.0,
            _ => self.ln_value(x).exp(),
        }
    }

    /// Analytic upper bound used as the thinning envelope.
    pub fn sup(&self) -> f64 {
        match self {
            IntensityShape::Constant | IntensityShape::Bump(_) => 1.0,
            IntensityShape::BumpMixture { weights, .. } => weights.iter().sum(),
        }
    }

    /// Weighted bumps; `None` for the constant shape.
    pub fn bumps(&self) -> Option<Vec<(f64, &GaussianBump)>> {
        match self {
            IntensityShape::Constant => None,
            IntensityShape::Bump(b) => Some(vec![(1.0, b)]),
            IntensityShape::BumpMixture { weights, bumps } => {
                Some(weights.iter().copied().zip(bumps.iter()).collect())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct IntensityModel {
    pub alpha: f64,
    pub eta: TimeProfile,
    pub shape: IntensityShape,
}

impl IntensityModel {
    pub fn new(alpha: f64, eta: TimeProfile, shape: IntensityShape) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Invalid(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        eta.validate()?;
        Ok(Self { alpha, eta, shape })
    }

    /// Homogeneous intensity `alpha` (eta = 1, g = 1).
    pub fn homogeneous(alpha: f64) -> Result<Self> {
        Self::new(alpha, TimeProfile::Constant(1.0), IntensityShape::Constant)
    }

    pub fn rate(&self, t: f64, x: &[f64]) -> f64 {
        self.alpha * self.eta.eval(t) * self.shape.value(x)
    }

    /// Dominating rate `alpha * sup eta * sup g`.
    pub fn dominating_rate(&self) -> f64 {
        self.alpha * self.eta.sup() * self.shape.sup()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_interpolates_and_clamps() {
        let eta = TimeProfile::Table(vec![(0.0, 1.0), (2.0, 3.0), (4.0, 1.0)]);
        eta.validate().unwrap();
        assert_eq!(eta.eval(-1.0), 1.0);
        assert_eq!(eta.eval(1.0), 2.0);
        assert_eq!(eta.eval(3.0), 2.0);
        assert_eq!(eta.eval(10.0), 1.0);
        assert_eq!(eta.sup(), 3.0);
        assert!(TimeProfile::Table(vec![(0.0, 1.0), (0.0, 2.0)])
            .validate()
            .is_err());
        assert!(TimeProfile::Constant(0.0).validate().is_err());
    }

    #[test]
    fn bump_peaks_at_one() {
        let b = GaussianBump::new(
            DVector::from_vec(vec![1.0]),
            DMatrix::from_element(1, 1, 0.25),
        )
        .unwrap();
        let g = IntensityShape::Bump(b);
        assert_eq!(g.value(&[1.0]), 1.0);
        assert!((g.value(&[1.5]) - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(g.sup(), 1.0);
    }

    #[test]
    fn mixture_sup_is_weight_sum() {
        let b = || GaussianBump::new(DVector::zeros(1), DMatrix::identity(1, 1)).unwrap();
        let g = IntensityShape::bump_mixture(vec![0.5, 2.0], vec![b(), b()]).unwrap();
        assert_eq!(g.sup(), 2.5);
        assert!((g.value(&[0.0]) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn alpha_must_be_positive() {
        assert!(IntensityModel::homogeneous(0.0).is_err());
        assert_eq!(
            IntensityModel::homogeneous(0.3).unwrap().dominating_rate(),
            0.3
        );
    }
}
