use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The setup description violates one of its invariants.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown preset `{0}` (expected one-loop, three-loop or lossless)")]
    UnknownPreset(String),

    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid has {cells} cells; exhaustive enumeration is limited to {limit}")]
    GridTooLarge { cells: usize, limit: usize },

    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
