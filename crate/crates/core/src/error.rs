use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rational {0:?}")]
    BadRational(String),
    #[error("negative weight {0}")]
    NegativeWeight(String),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("invalid instance: {0}")]
    InvalidGraph(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("instance rejected by the sampler: {0}")]
    Unsupported(String),
    #[error("configuration is not valid for this instance")]
    InvalidConfiguration,
    #[error("state space too large: {0}")]
    CapExceeded(String),
    #[error("outside proven region: {0}")]
    OutsideProvenRegion(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
