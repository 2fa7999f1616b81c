use num_bigint::BigUint;
use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is out of range or inconsistent.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A value violates a quadratic-residuosity precondition.
    #[error("{value} is not a quadratic residue mod {modulus}")]
    NotQuadraticResidue { value: BigUint, modulus: BigUint },

    /// A value shares a factor with the modulus; the caller must decide remediation.
    #[error("{value} shares a factor with the modulus {modulus}")]
    SharedFactor { value: BigUint, modulus: BigUint },

    /// Operation requested on a task variant that cannot support it.
    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),

    /// Exhaustive computation would exceed the configured capacity.
    #[error("capacity exceeded: {0}")]
    CapacityExceeded(String),

    /// A persisted file failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A persisted file declares a format version this build does not read.
    #[error("unsupported format version `{found}` (expected `{expected}`)")]
    VersionMismatch { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
