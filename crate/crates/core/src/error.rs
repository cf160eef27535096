use thiserror::Error;

/// Errors raised across the crate.
///
/// The variants map one-to-one onto the CLI exit codes (see [`CdpError::exit_code`]).
#[derive(Debug, Error)]
pub enum CdpError {
    /// A parameter or argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A size cap (partition count, matrix dimension, memory) would be exceeded.
    #[error("resource cap exceeded: {0}")]
    Resource(String),
    /// The requested combination of model pieces has no implementation on this path.
    #[error("unsupported: {0}")]
    Capability(String),
    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),
    /// Invalid configuration; the message names the offending field path.
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CdpError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CdpError::Config(_) | CdpError::Domain(_) => 2,
            CdpError::Data(_) | CdpError::Io(_) => 3,
            CdpError::Capability(_) => 4,
            CdpError::Resource(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, CdpError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(CdpError::Domain(msg.into()))
}
