use crate::error::{Error, Result};

/// Response values on a lag (or time) grid, one vector entry per output of
/// the test function, with matching standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseCurve {
    pub lags: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
}

impl ResponseCurve {
    pub fn new(lags: Vec<f64>, values: Vec<Vec<f64>>, stderr: Vec<Vec<f64>>) -> Result<Self> {
        if lags.len() != values.len() || lags.len() != stderr.len() {
            return Err(Error::Format(format!(
                "curve has {} lags but {} value rows and {} stderr rows",
                lags.len(),
                values.len(),
                stderr.len()
            )));
        }
        if lags.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Format(
                "curve lags must be strictly increasing".into(),
            ));
        }
        let width = values.first().map_or(0, Vec::len);
        for (v, s) in values.iter().zip(&stderr) {
            if v.len() != width || s.len() != width {
                return Err(Error::Format("ragged curve rows".into()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Format("non-finite curve value".into()));
            }
        }
        Ok(Self {
            lags,
            values,
            stderr,
        })
    }

    /// Curve with zero standard errors.
    pub fn exact(lags: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let stderr = values.iter().map(|v| vec![0.0; v.len()]).collect();
        Self::new(lags, values, stderr)
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    /// Number of outputs per lag.
    pub fn width(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Output `j` across all lags.
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[j]).collect()
    }

    /// Index of a lag on the grid, matched to a relative tolerance.
    pub fn index_of(&self, lag: f64) -> Option<usize> {
        let tol = 1e-9 * lag.abs().max(1.0);
        self.lags.iter().position(|l| (l - lag).abs() <= tol)
    }
}
