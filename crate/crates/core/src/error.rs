use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the interval it must live in.
    #[error("domain error: {what} = {value} not in {interval}")]
    Domain {
        what: &'static str,
        value: f64,
        interval: String,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// The model or family does not support the requested operation.
    #[error("unsupported: {0}")]
    Capability(String),
    /// An exhaustive search would exceed its guard.
    #[error("resource guard exceeded: {what} needs {required} > {limit}")]
    Resource {
        what: &'static str,
        required: f64,
        limit: f64,
    },
    #[error("lookup error: {0}")]
    Lookup(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("index {index} out of range 1..={max}")]
    Index { index: usize, max: usize },
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
