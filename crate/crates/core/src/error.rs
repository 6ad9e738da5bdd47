use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("covariance of {0} is not symmetric positive-definite")]
    NotSpd(&'static str),

    #[error("jump map is not invertible: |det(I + H)| = {det:e}")]
    NonInvertibleJump { det: f64 },

    #[error("invalid parameter: {0}")]
    Invalid(String),

    #[error("lag {lag} is {reason}")]
    Lag { lag: f64, reason: &'static str },

    #[error("numerical blow-up: non-finite state at step {step}")]
    BlowUp { step: usize },

    #[error("matrix L is not positive-stable (eigenvalue with real part {0:e})")]
    Unstable(f64),

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("{skipped} of {total} samples underflowed the stationary density (limit 0.1%)")]
    DensityUnderflow { skipped: usize, total: usize },

    #[error("autocorrelation does not decay within {max_lag} lags; use a longer trajectory")]
    NonDecaying { max_lag: usize },

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config: {0}")]
    Config(#[from] serde_json::Error),
}

impl Error {
    /// Whether the failure is numerical (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BlowUp { .. }
                | Error::Unstable(_)
                | Error::Singular(_)
                | Error::DensityUnderflow { .. }
                | Error::NonDecaying { .. }
                | Error::NotSpd(_)
                | Error::NonInvertibleJump { .. }
        )
    }
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension {
            what,
            expected,
            got,
        });
    }
    Ok(())
}
