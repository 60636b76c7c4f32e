//! Crate-wide error type.

use std::fmt;

/// Errors produced by the perturbation toolkit.
#[derive(Debug)]
pub enum Error {
    /// Tensor/model dimensions do not chain or match.
    Shape(String),
    /// An argument is outside the operation's domain (empty tensor,
    /// non-finite value, zero perturbation, ...).
    Domain(String),
    /// A configuration value violates its preconditions.
    Config(String),
    /// A numerical abort: NaN loss, non-finite gradients.
    Numerical(String),
    /// An analysis precondition failed (e.g. too few successful attacks).
    Analysis(String),
    /// No feasible solution exists for the requested subproblem.
    Infeasible(String),
    /// A serialized artifact could not be parsed.
    Parse(String),
    /// A serialized artifact declares a format version we do not read.
    UnsupportedVersion { found: u32, expected: u32 },
    Io(std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(msg) => write!(f, "shape error: {msg}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Numerical(msg) => write!(f, "numerical error: {msg}"),
            Error::Analysis(msg) => write!(f, "analysis error: {msg}"),
            Error::Infeasible(msg) => write!(f, "infeasible: {msg}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::UnsupportedVersion { found, expected } => {
                write!(f, "unsupported format version {found} (expected {expected})")
            }
            Error::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        // serde_json's Display carries line/column context.
        Error::Parse(err.to_string())
    }
}
