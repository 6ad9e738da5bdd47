use nalgebra::DMatrix;

use super::lag_indices;
use super::stats::{batch_length, batch_means_se, MIN_BATCHES};
use crate::error::{Error, Result};
use crate::model::Trajectory;

/// Lagged covariances `<x(s+tau) x(s)^T>` of the mean-centred trajectory.
#[derive(Debug, Clone)]
pub struct Autocorrelation {
    pub lags: Vec<f64>,
    pub values: Vec<DMatrix<f64>>,
    pub stderr: Vec<DMatrix<f64>>,
}

fn centred(traj: &Trajectory) -> Vec<f64> {
    let (n, k) = (traj.len(), traj.dim());
    let mut mean = vec![0.0; k];
    for row in traj.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut out = traj.data().to_vec();
    for row in out.chunks_exact_mut(k) {
        for (v, m) in row.iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    out
}

/// Lag-`m` covariance, normalised by `N - m - 1` so that lag 0 is the
/// unbiased sample covariance.
fn lagged_cov(x: &[f64], k: usize, m: usize) -> DMatrix<f64> {
    let n = x.len() / k;
    let mut acc = DMatrix::zeros(k, k);
    for s in 0..n - m {
        let a = &x[(s + m) * k..(s + m + 1) * k];
        let b = &x[s * k..(s + 1) * k];
        for i in 0..k {
            for j in 0..k {
                acc[(i, j)] += a[i] * b[j];
            }
        }
    }
    acc / (n - m - 1) as f64
}

/// Autocorrelation at the requested lags, with batch-means standard errors.
pub fn autocorrelation(traj: &Trajectory, lags: &[f64]) -> Result<Autocorrelation> {
    let idx = lag_indices(lags, traj.dt(), traj.len())?;
    let (n, k) = (traj.len(), traj.dim());
    let x = centred(traj);
    let tcorr = estimate_tcorr(traj).map(|t| t.tcorr).ok();
    let mut values = Vec::with_capacity(idx.len());
    let mut stderr = Vec::with_capacity(idx.len());
    for &m in &idx {
        values.push(lagged_cov(&x, k, m));
        let pairs = n - m;
        let b = match tcorr {
            Some(t) => batch_length(pairs, t, traj.dt()),
            None => (pairs / MIN_BATCHES).max(1),
        };
        let mut se = DMatrix::zeros(k, k);
        let mut prod = vec![0.0; pairs];
        for i in 0..k {
            for j in 0..k {
                for (s, p) in prod.iter_mut().enumerate() {
                    *p = x[(s + m) * k + i] * x[s * k + j];
                }
                se[(i, j)] = batch_means_se(&prod, b);
            }
        }
        stderr.push(se);
    }
    Ok(Autocorrelation {
        lags: lags.to_vec(),
        values,
        stderr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcorrEstimate {
    pub tcorr: f64,
    /// Lag (time units) where the integration stopped.
    pub cutoff: f64,
}

/// The cutoff search covers lags up to `N / MAX_LAG_FRACTION`.
pub const MAX_LAG_FRACTION: usize = 20;

/// Decorrelation time: largest eigenvalue of `(∫ ACF dt) C^{-1}`.
///
/// The normalised ACF is integrated by the trapezoid rule up to the first lag
/// where its largest entry drops below twice its Bartlett standard error.
pub fn estimate_tcorr(traj: &Trajectory) -> Result<TcorrEstimate> {
    let (n, k, dt) = (traj.len(), traj.dim(), traj.dt());
    if n < 40 {
        return Err(Error::Invalid(format!(
            "decorrelation time needs at least 40 samples, got {n}"
        )));
    }
    let x = centred(traj);
    let c0 = lagged_cov(&x, k, 0);
    let c_inv = c0
        .clone()
        .cholesky()
        .ok_or(Error::Singular("trajectory covariance"))?
        .inverse();
    let scale: Vec<f64> = (0..k).map(|i| c0[(i, i)].sqrt()).collect();
    let rho = |c: &DMatrix<f64>| {
        let mut r: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                r = r.max((c[(i, j)] / (scale[i] * scale[j])).abs());
            }
        }
        r
    };
    // Bartlett's error grows with the lags already summed, so a persistent
    // correlation would eventually "cross" anyway; the window keeps that from
    // passing as decay.
    let max_lag = n / MAX_LAG_FRACTION;
    let mut integral = &c0 * 0.5;
    let mut sum_sq = 0.0;
    for m in 1..=max_lag {
        let c = lagged_cov(&x, k, m);
        let r = rho(&c);
        let se = ((1.0 + 2.0 * sum_sq) / n as f64).sqrt();
        if r < 2.0 * se {
            integral += &c * 0.5;
            let m_int = integral * dt * &c_inv;
            let tcorr = m_int
                .complex_eigenvalues()
                .iter()
                .map(|z| z.re)
                .fold(f64::NEG_INFINITY, f64::max);
            if !(tcorr.is_finite() && tcorr > 0.0) {
                return Err(Error::Singular("integrated autocorrelation"));
            }
            return Ok(TcorrEstimate {
                tcorr,
                cutoff: m as f64 * dt,
            });
        }
        integral += c;
        sum_sq += r * r;
    }
    Err(Error::NonDecaying { max_lag })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Ok,
    Warn,
}

/// Threshold on `alpha * T_corr` below which the leading-order response is
/// trusted.
pub const DIAGNOSTIC_THRESHOLD: f64 = 0.1;

/// `alpha * T_corr` and whether it is below [`DIAGNOSTIC_THRESHOLD`].
pub fn accuracy_diagnostic(alpha: f64, tcorr: f64) -> Result<(f64, Verdict)> {
    if !(alpha.is_finite() && alpha > 0.0 && tcorr.is_finite() && tcorr > 0.0) {
        return Err(Error::Invalid(format!(
            "diagnostic needs positive alpha and T_corr, got {alpha} and {tcorr}"
        )));
    }
    let ratio = alpha * tcorr;
    let verdict = if ratio < DIAGNOSTIC_THRESHOLD {
        Verdict::Ok
    } else {
        Verdict::Warn
    };
    Ok((ratio, verdict))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagnostic_cases() {
        assert_eq!(
            accuracy_diagnostic(0.05, 0.5).unwrap(),
            (0.025, Verdict::Ok)
        );
        assert_eq!(accuracy_diagnostic(1.0, 0.5).unwrap(), (0.5, Verdict::Warn));
        let (r, v) = accuracy_diagnostic(0.2, 0.5).unwrap();
        assert_eq!(r, 0.1);
        assert_eq!(v, Verdict::Warn);
        assert!(accuracy_diagnostic(0.0, 0.5).is_err());
    }

    #[test]
    fn lag_zero_is_sample_covariance() {
        let data: Vec<f64> = (0..50).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let t = Trajectory::new(0.1, 2, data).unwrap();
        let acf = autocorrelation(&t, &[0.0]).unwrap();
        let m = crate::model::estimate_moments(&t);
        assert!((&acf.values[0] - &m.cov).amax() < 1e-12);
    }

    #[test]
    fn ramp_does_not_decay() {
        let t = Trajectory::new(0.1, 1, (0..400).map(f64::from).collect()).unwrap();
        assert!(matches!(estimate_tcorr(&t), Err(Error::NonDecaying { .. })));
    }

    #[test]
    fn constant_is_singular() {
        let t = Trajectory::new(0.1, 1, vec![1.0; 100]).unwrap();
        assert!(matches!(estimate_tcorr(&t), Err(Error::Singular(_))));
    }
}
