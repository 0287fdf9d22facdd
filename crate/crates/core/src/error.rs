use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cluster operator must contain only pure creation terms")]
    InvalidClusterOperator,

    #[error("nested-commutator series did not terminate within order {cap}")]
    NonTerminating { cap: usize },

    #[error("state has truncation {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("ground-state solver did not converge at g = {g}")]
    NoConvergence { g: f64 },

    #[error("state is not stationary: residual {residual:e}")]
    NotStationary { residual: f64 },

    #[error("no spectrum complexification found for g in [{lo}, {hi}]")]
    NotFoundInRange { lo: f64, hi: f64 },

    #[error("integration diverged at t = {t} (|coefficient| = {magnitude:e})")]
    Diverged { t: f64, magnitude: f64 },

    #[error("time series is not uniformly sampled")]
    NonUniformSampling,

    #[error("requested {requested} peaks, found {found}")]
    FewerPeaksThanRequested { requested: usize, found: usize },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
