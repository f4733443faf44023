use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("numerical failure after {iterations} iterations: {what}")]
    Numerical { what: String, iterations: usize },

    #[error("step failed at t = {time:.4} s (residual {residual:.3e}): {reason}")]
    StepFailure {
        time: f64,
        residual: f64,
        reason: String,
    },

    #[error("infeasible configuration at theta = {theta_deg:.3} deg: {reason}")]
    InfeasibleConfiguration { theta_deg: f64, reason: String },

    #[error("deflection never settles below {threshold:.4e} m within {n} samples")]
    NoSettle { threshold: f64, n: usize },

    #[error("batch quality: {0}")]
    BatchQuality(String),

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("insufficient horizon: {n_steps} steps cannot cover a window of {needed}")]
    InsufficientHorizon { n_steps: usize, needed: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by bad numbers rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical { .. }
                | Error::StepFailure { .. }
                | Error::Divergence { .. }
                | Error::NoSettle { .. }
                | Error::BatchQuality(_)
        )
    }
}
