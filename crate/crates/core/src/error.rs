use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("critical ratio undefined: {0}")]
    UndefinedRatio(String),

    #[error("integrator did not converge within {max_steps} steps (reached t = {t})")]
    NonConvergence { max_steps: usize, t: f64 },

    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    #[error("eigenvalue iteration did not converge")]
    EigenNonConvergence,

    #[error("load error at row {row}, column `{column}`: {message}")]
    Load {
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("sampler failure: {0}")]
    SamplerFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
