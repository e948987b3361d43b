use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("malformed image header: {0}")]
    MalformedHeader(String),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("expected {expected} channel(s), got {actual}")]
    WrongChannels { expected: usize, actual: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("image too small: {0}")]
    TooSmall(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("resolver config: {0}")]
    Config(String),
    #[error("external resolver output missing: {0}")]
    MissingExternal(PathBuf),
    #[error("resolver `{resolver}` failed on image `{image}`: {source}")]
    ResolverFailed {
        resolver: String,
        image: String,
        #[source]
        source: Box<Error>,
    },
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("serialization: {0}")]
    Serialization(String),
}

impl Error {
    /// Stable machine-readable code, used as the CLI error prefix.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Unreadable { .. } => "E_READ",
            Error::Write { .. } => "E_WRITE",
            Error::UnsupportedFormat(_) => "E_FORMAT",
            Error::Truncated { .. } => "E_TRUNCATED",
            Error::MalformedHeader(_) => "E_HEADER",
            Error::InvalidImage(_) => "E_IMAGE",
            Error::WrongChannels { .. } => "E_CHANNELS",
            Error::DimensionMismatch(_) => "E_DIMENSIONS",
            Error::TooSmall(_) => "E_TOO_SMALL",
            Error::InvalidParameter(_) => "E_PARAM",
            Error::Config(_) => "E_CONFIG",
            Error::MissingExternal(_) => "E_EXTERNAL_MISSING",
            Error::ResolverFailed { .. } => "E_RESOLVER",
            Error::EmptyDataset(_) => "E_EMPTY",
            Error::Serialization(_) => "E_SERDE",
        }
    }
}
