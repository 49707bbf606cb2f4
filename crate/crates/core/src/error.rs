use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("matrix error: {0}")]
    Matrix(String),
    #[error("family has no closed-form predictive law: {0}")]
    UnsupportedFamily(String),
    #[error("unsupported combination: {0}")]
    Unsupported(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("malformed partition: {0}")]
    Partition(String),
    #[error("invalid law: {0}")]
    Law(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
