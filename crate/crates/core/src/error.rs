use thiserror::Error;

/// Failure classes shared by every module.
///
/// The variants map one-to-one onto CLI exit codes (see [`Error::exit_code`]).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid argument values (zero vectors, non-positive tolerances, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// The law does not support the requested operation (no density, MGF diverges, ...).
    #[error("capability error: {0}")]
    Capability(String),
    /// Exact enumeration would exceed the configured outcome limit.
    #[error("size error: {outcomes} outcomes exceed limit {limit}; use --method mc")]
    Size { outcomes: f64, limit: u64 },
    /// Malformed or incomplete configuration. `path` is the offending key path.
    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },
    /// A grid is too coarse for the requested geometric quantity.
    #[error("resolution error: {0}")]
    Resolution(String),
    /// Quadrature or another numerical routine did not converge.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// The input density is not symmetric unimodal.
    #[error("shape error: {0}")]
    Shape(String),
    /// A checked inequality failed; carries the witness.
    #[error("assertion failed: {0}")]
    Assertion(String),
}

impl Error {
    pub fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Domain(_) => 2,
            Error::Capability(_) | Error::Size { .. } | Error::Shape(_) => 3,
            Error::Resolution(_) | Error::Numeric(_) => 4,
            Error::Assertion(_) => 1,
        }
    }

    /// Short machine-readable kind tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Capability(_) => "capability",
            Error::Size { .. } => "size",
            Error::Config { .. } => "config",
            Error::Resolution(_) => "resolution",
            Error::Numeric(_) => "numeric",
            Error::Shape(_) => "shape",
            Error::Assertion(_) => "assertion",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
