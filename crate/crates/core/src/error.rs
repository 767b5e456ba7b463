use thiserror::Error;

/// Errors produced by graph construction, identification and the oracle.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An enumeration grew past its configured cap.
    #[error("{what} exceeded the cap of {cap} (combinatorial count {count})")]
    CapExceeded { what: &'static str, cap: u64, count: u128 },

    #[error("parse error at {position}: {message}")]
    Parse { position: String, message: String },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),
}

impl Error {
    /// True for failures caused by an enumeration cap rather than bad input.
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::CapExceeded { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
