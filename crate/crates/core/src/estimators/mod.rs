//! Time-correlation estimators of the response to jump perturbations.
//!
//! Every estimator is a lagged correlation `<psi(x(s+tau)) w(x(s))>` along one
//! unperturbed trajectory, with a weight `w` built from the stationary density
//! `p0`:
//!
//! * deterministic jump: `w = p0(x̂) |∂x̂/∂x| / p0(x) - 1`
//! * random jump: `w = J(x) / p0(x) - 1`
//! * random-time response operator: `w = J_g(x) / p0(x) - g(x)`
//!
//! Weights are formed in log space. Samples where `p0(x) < 1e-300` are
//! skipped; more than 0.1% skipped samples is an error.

mod acf;
mod curve;
mod stats;

use rayon::prelude::*;

pub use acf::{
    accuracy_diagnostic, autocorrelation, estimate_tcorr, Autocorrelation, TcorrEstimate, Verdict,
    DIAGNOSTIC_THRESHOLD, MAX_LAG_FRACTION,
};
pub use curve::ResponseCurve;
pub use stats::{batch_length, batch_means_se, MIN_BATCHES};

use crate::error::{Error, Result};
use crate::integrals::JumpIntegral;
use crate::model::{AffineJumpMap, Density, IntensityShape, TimeProfile, Trajectory};

/// Densities below this are treated as underflow.
pub const DENSITY_FLOOR: f64 = 1e-300;
/// Largest tolerated fraction of skipped samples.
pub const MAX_SKIP_FRACTION: f64 = 1e-3;

/// Observable `psi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    /// `psi(x) = x`, one output per state component.
    Identity,
    Component {
        i: usize,
    },
    /// `psi(x) = x_i x_j`.
    Quadratic {
        i: usize,
        j: usize,
    },
    /// `|x|^2 / 2`.
    Energy,
}

impl TestFunction {
    pub fn validate(&self, k: usize) -> Result<()> {
        let bad = match *self {
            TestFunction::Component { i } => i >= k,
            TestFunction::Quadratic { i, j } => i >= k || j >= k,
            _ => false,
        };
        if bad {
            return Err(Error::Invalid(format!(
                "test function {self:?} out of range for K = {k}"
            )));
        }
        Ok(())
    }

    /// Number of outputs for a K-dimensional state.
    pub fn width(&self, k: usize) -> usize {
        match self {
            TestFunction::Identity => k,
            _ => 1,
        }
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match *self {
            TestFunction::Identity => out.copy_from_slice(x),
            TestFunction::Component { i } => out[0] = x[i],
            TestFunction::Quadratic { i, j } => out[0] = x[i] * x[j],
            TestFunction::Energy => out[0] = 0.5 * x.iter().map(|v| v * v).sum::<f64>(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.width(x.len())];
        self.eval_into(x, &mut out);
        out
    }
}

/// Estimator weights along a trajectory; skipped samples are `NaN`.
#[derive(Debug, Clone)]
pub struct WeightSeries {
    pub values: Vec<f64>,
    pub skipped: usize,
}

impl WeightSeries {
    fn build(
        traj: &Trajectory,
        p0: &Density,
        mut f: impl FnMut(&[f64], f64) -> f64,
    ) -> Result<Self> {
        if p0.dim() != traj.dim() {
            return Err(Error::Dimension {
                what: "stationary density",
                expected: traj.dim(),
                got: p0.dim(),
            });
        }
        let floor = DENSITY_FLOOR.ln();
        let mut skipped = 0;
        let values: Vec<f64> = traj
            .rows()
            .map(|x| {
                let ln_p0 = p0.ln_pdf(x);
                if !(ln_p0 >= floor) {
                    skipped += 1;
                    f64::NAN
                } else {
                    f(x, ln_p0)
                }
            })
            .collect();
        let total = values.len();
        if skipped as f64 > MAX_SKIP_FRACTION * total as f64 {
            return Err(Error::DensityUnderflow { skipped, total });
        }
        if skipped > 0 {
            log::warn!("{skipped} of {total} samples skipped: stationary density underflow");
        }
        Ok(Self { values, skipped })
    }

    /// Mean and batch-means standard error over the usable samples.
    pub fn mean_and_se(&self, batch_len: usize) -> (f64, f64) {
        let v: Vec<f64> = self
            .values
            .iter()
            .copied()
            .filter(|w| !w.is_nan())
            .collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        (mean, batch_means_se(&v, batch_len))
    }
}

/// `p0(x̂) |∂x̂/∂x| / p0(x) - 1` for a jump that does not depend on `z`.
pub fn det_jump_weights(
    traj: &Trajectory,
    p0: &Density,
    map: &AffineJumpMap,
) -> Result<WeightSeries> {
    if !map.is_z_free() {
        return Err(Error::Invalid(
            "deterministic-jump weights need a map without z coupling".into(),
        ));
    }
    crate::error::check_dim("jump map", traj.dim(), map.dim())?;
    let offset = map.h().as_slice().to_vec();
    let ln_jac = -map.abs_det().ln();
    let mut xhat = vec![0.0; traj.dim()];
    WeightSeries::build(traj, p0, |x, ln_p0| {
        map.invert_with_offset(x, &offset, &mut xhat);
        let ln_num = p0.ln_pdf(&xhat) + ln_jac;
        (ln_num - ln_p0).exp() - 1.0
    })
}

/// `J(x) / p0(x) - 1`.
pub fn random_jump_weights(
    traj: &Trajectory,
    p0: &Density,
    j: &JumpIntegral,
) -> Result<WeightSeries> {
    crate::error::check_dim("jump integral", traj.dim(), j.dim())?;
    if j.spec().shape.is_some() {
        return Err(Error::Invalid(
            "random-jump weights take J without an intensity shape".into(),
        ));
    }
    WeightSeries::build(traj, p0, |x, ln_p0| (j.ln_eval(x) - ln_p0).exp() - 1.0)
}

/// `J_g(x) / p0(x) - g(x)`.
pub fn operator_weights(
    traj: &Trajectory,
    p0: &Density,
    jg: &JumpIntegral,
    shape: &IntensityShape,
) -> Result<WeightSeries> {
    crate::error::check_dim("jump integral", traj.dim(), jg.dim())?;
    if jg.spec().shape.is_none() {
        return Err(Error::Invalid(
            "response operator needs J_g built with an intensity shape".into(),
        ));
    }
    WeightSeries::build(traj, p0, |x, ln_p0| {
        (jg.ln_eval(x) - ln_p0).exp() - shape.value(x)
    })
}

/// Grid indices of `lags`; each must be a multiple of `dt` leaving at least two
/// pairs in a trajectory of `n` samples.
pub(crate) fn lag_indices(lags: &[f64], dt: f64, n: usize) -> Result<Vec<usize>> {
    lags.iter()
        .map(|&lag| {
            if !(lag.is_finite() && lag >= 0.0) {
                return Err(Error::Lag {
                    lag,
                    reason: "negative or not finite",
                });
            }
            let m = (lag / dt).round();
            if (m * dt - lag).abs() > 1e-9 * lag.max(dt) {
                return Err(Error::Lag {
                    lag,
                    reason: "not a multiple of the trajectory step",
                });
            }
            let m = m as usize;
            if m + 2 > n {
                return Err(Error::Lag {
                    lag,
                    reason: "beyond the trajectory span",
                });
            }
            Ok(m)
        })
        .collect()
}

/// Lagged correlation `<psi(x(s+tau)) w(s)>` with batch-means errors.
///
/// `tcorr` sets the batch length; when `None` it is estimated from `traj`.
pub fn correlate(
    traj: &Trajectory,
    weights: &WeightSeries,
    psi: TestFunction,
    lags: &[f64],
    tcorr: Option<f64>,
) -> Result<ResponseCurve> {
    let (n, k) = (traj.len(), traj.dim());
    psi.validate(k)?;
    if weights.values.len() != n {
        return Err(Error::Invalid(
            "weight series does not match the trajectory".into(),
        ));
    }
    let idx = lag_indices(lags, traj.dt(), n)?;
    let tcorr = match tcorr {
        Some(t) => t,
        None => match estimate_tcorr(traj) {
            Ok(t) => t.tcorr,
            Err(e) => {
                log::warn!("decorrelation time unavailable ({e}); using {MIN_BATCHES} batches");
                f64::INFINITY
            }
        },
    };
    let width = psi.width(k);
    let mut psi_vals = vec![0.0; n * width];
    for (x, out) in traj.rows().zip(psi_vals.chunks_exact_mut(width)) {
        psi.eval_into(x, out);
    }
    let w = &weights.values;
    let rows: Vec<(Vec<f64>, Vec<f64>)> = idx
        .par_iter()
        .map(|&m| {
            let pairs = n - m;
            let mut series = vec![Vec::with_capacity(pairs); width];
            for s in 0..pairs {
                let ws = w[s];
                if ws.is_nan() {
                    continue;
                }
                let p = &psi_vals[(s + m) * width..(s + m + 1) * width];
                for (c, v) in series.iter_mut().zip(p) {
                    c.push(v * ws);
                }
            }
            let used = series[0].len();
            let b = if tcorr.is_finite() {
                batch_length(used, tcorr, traj.dt())
            } else {
                (used / MIN_BATCHES).max(1)
            };
            let mean = series
                .iter()
                .map(|c| c.iter().sum::<f64>() / used as f64)
                .collect();
            let se = series.iter().map(|c| batch_means_se(c, b)).collect();
            (mean, se)
        })
        .collect();
    let (values, stderr) = rows.into_iter().unzip();
    ResponseCurve::new(lags.to_vec(), values, stderr)
}

/// Response to a deterministic jump applied at time 0.
pub fn det_jump_response(
    traj: &Trajectory,
    p0: &Density,
    map: &AffineJumpMap,
    psi: TestFunction,
    lags: &[f64],
) -> Result<ResponseCurve> {
    let w = det_jump_weights(traj, p0, map)?;
    correlate(traj, &w, psi, lags, None)
}

/// Response to a random jump `h(x, z)`, `z ~ nu`, applied at time 0.
pub fn random_jump_response(
    traj: &Trajectory,
    p0: &Density,
    j: &JumpIntegral,
    psi: TestFunction,
    lags: &[f64],
) -> Result<ResponseCurve> {
    let w = random_jump_weights(traj, p0, j)?;
    correlate(traj, &w, psi, lags, None)
}

/// Average response operator `R_psi(tau)` for jumps at random times.
pub fn response_operator(
    traj: &Trajectory,
    p0: &Density,
    jg: &JumpIntegral,
    shape: &IntensityShape,
    psi: TestFunction,
    lags: &[f64],
) -> Result<ResponseCurve> {
    let w = operator_weights(traj, p0, jg, shape)?;
    correlate(traj, &w, psi, lags, None)
}

/// `alpha ∫_0^t R(t - s) eta(s) ds` by the trapezoid rule on the lag grid of
/// `r`, which must be uniform and start at 0. The error column is the same
/// integral of `|eta|` times the standard error of `r`, a bound that assumes
/// fully correlated errors.
pub fn convolve_response(
    r: &ResponseCurve,
    eta: &TimeProfile,
    alpha: f64,
    tgrid: &[f64],
) -> Result<ResponseCurve> {
    if r.len() < 2 || r.lags[0] != 0.0 {
        return Err(Error::Invalid(
            "response curve must start at lag 0 with at least two lags".into(),
        ));
    }
    let h = r.lags[1];
    if r.lags
        .iter()
        .enumerate()
        .any(|(i, l)| (l - i as f64 * h).abs() > 1e-9 * h.max(*l))
    {
        return Err(Error::Invalid(
            "response curve lags must be uniformly spaced".into(),
        ));
    }
    eta.validate()?;
    let width = r.width();
    let mut values = Vec::with_capacity(tgrid.len());
    let mut stderr = Vec::with_capacity(tgrid.len());
    for &t in tgrid {
        let n = (t / h).round();
        if !(t >= 0.0) || (n * h - t).abs() > 1e-9 * h.max(t) {
            return Err(Error::Lag {
                lag: t,
                reason: "not on the response lag grid",
            });
        }
        let n = n as usize;
        if n >= r.len() {
            return Err(Error::Lag {
                lag: t,
                reason: "beyond the response lag span",
            });
        }
        let mut v = vec![0.0; width];
        let mut e = vec![0.0; width];
        for kk in 0..=n {
            let wt = if kk == 0 || kk == n { 0.5 } else { 1.0 } * h * alpha;
            let eta_s = eta.eval(kk as f64 * h);
            for c in 0..width {
                v[c] += wt * r.values[n - kk][c] * eta_s;
                e[c] += wt.abs() * r.stderr[n - kk][c] * eta_s.abs();
            }
        }
        if n == 0 {
            v.iter_mut().for_each(|x| *x = 0.0);
            e.iter_mut().for_each(|x| *x = 0.0);
        }
        values.push(v);
        stderr.push(e);
    }
    ResponseCurve::new(tgrid.to_vec(), values, stderr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(lags: Vec<f64>, f: impl Fn(f64) -> f64) -> ResponseCurve {
        let v = lags.iter().map(|&l| vec![f(l)]).collect();
        ResponseCurve::exact(lags, v).unwrap()
    }

    fn grid(n: usize, h: f64) -> Vec<f64> {
        (0..=n).map(|i| i as f64 * h).collect()
    }

    #[test]
    fn convolution_of_constant_is_ramp() {
        let r = curve(grid(100, 0.1), |_| 1.0);
        let out =
            convolve_response(&r, &TimeProfile::Constant(1.0), 0.3, &[0.0, 1.0, 5.0]).unwrap();
        for (t, v) in out.lags.iter().zip(&out.values) {
            assert!((v[0] - 0.3 * t).abs() < 1e-12);
        }
    }

    #[test]
    fn convolution_of_exponential() {
        let h = 0.01;
        let r = curve(grid(500, h), |t| (-t).exp());
        let out =
            convolve_response(&r, &TimeProfile::Constant(1.0), 0.5, &[0.5, 1.0, 2.0, 5.0]).unwrap();
        for (t, v) in out.lags.iter().zip(&out.values) {
            let exact = 0.5 * (1.0 - (-t).exp());
            assert!((v[0] - exact).abs() < 0.5 * h * h);
        }
        let zero = convolve_response(&r, &TimeProfile::Constant(1.0), 0.0, &[1.0]).unwrap();
        assert_eq!(zero.values[0][0], 0.0);
    }

    #[test]
    fn convolution_grid_errors() {
        let r = curve(grid(10, 0.1), |_| 1.0);
        assert!(convolve_response(&r, &TimeProfile::Constant(1.0), 1.0, &[0.15]).is_err());
        assert!(convolve_response(&r, &TimeProfile::Constant(1.0), 1.0, &[2.0]).is_err());
    }

    #[test]
    fn lag_checks() {
        assert_eq!(
            lag_indices(&[0.0, 0.2, 0.5], 0.1, 10).unwrap(),
            vec![0, 2, 5]
        );
        assert!(matches!(
            lag_indices(&[0.15], 0.1, 10),
            Err(Error::Lag { .. })
        ));
        assert!(matches!(lag_indices(&[2.0], 0.1, 10), Err(Error::Lag { lag, .. }) if lag == 2.0));
    }

    #[test]
    fn test_functions() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(TestFunction::Identity.eval(&x), vec![1.0, 2.0, 3.0]);
        assert_eq!(TestFunction::Quadratic { i: 0, j: 2 }.eval(&x), vec![3.0]);
        assert_eq!(TestFunction::Energy.eval(&x), vec![7.0]);
        assert!(TestFunction::Component { i: 3 }.validate(3).is_err());
    }
}
