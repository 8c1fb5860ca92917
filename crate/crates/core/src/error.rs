use thiserror::Error;

/// Errors surfaced by the library, tagged with the failing contract.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a structural precondition (shape, hermiticity,
    /// monotonicity, closedness).
    #[error("validation: {0}")]
    Validation(String),

    /// An input left the domain on which the operation is defined
    /// (injectivity radius, chart bounds).
    #[error("domain: {0}")]
    Domain(String),

    /// The operation is not defined for the requested setting
    /// (e.g. Hodge star outside dimension 4).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Experiment configuration is malformed or inconsistent.
    #[error("config: {0}")]
    Config(String),

    /// A stated precondition of a theorem-level operation failed; the
    /// operation still reports what it measured.
    #[error("precondition: {0}")]
    Precondition(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
