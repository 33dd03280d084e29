//! Crate error type.

use alloc::string::String;
use core::fmt;

/// Errors produced by every module in this crate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Tensor shapes do not line up for the requested operation.
    Shape(String),
    /// A configuration value violates its documented constraints.
    Config(String),
    /// Caller supplied unusable input data (empty window, missing stream, ...).
    Input(String),
    /// An operation was invoked in the wrong order (backward before forward,
    /// training phase 2 before phase 1, ...).
    State(String),
    /// A byte-level container or object file failed to parse.
    Parse { offset: usize, what: String },
    /// A label or label schema mismatch.
    Schema(String),
    /// A container file is structurally damaged (truncation, bad magic, ...).
    Integrity(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(m) => write!(f, "shape error: {m}"),
            Error::Config(m) => write!(f, "config error: {m}"),
            Error::Input(m) => write!(f, "input error: {m}"),
            Error::State(m) => write!(f, "state error: {m}"),
            Error::Parse { offset, what } => write!(f, "parse error at byte {offset}: {what}"),
            Error::Schema(m) => write!(f, "schema error: {m}"),
            Error::Integrity(m) => write!(f, "integrity error: {m}"),
        }
    }
}

impl core::error::Error for Error {}
