use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("time {t} is outside the disturbance definition [0, {horizon})")]
    OutOfRange { t: f64, horizon: f64 },

    /// The surface assumption (HCB invertible, stable reduced-order motion)
    /// does not hold for the supplied plant and H.
    #[error("surface assumption violated (HCB invertible, stable reduced-order motion): {0}")]
    AssumptionViolation(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("simulation diverged at step {step}: |x| = {norm:e}")]
    Divergence { step: usize, norm: f64 },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
