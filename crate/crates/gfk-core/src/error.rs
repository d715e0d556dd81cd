//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed file contents (bad header key, unparsable line, ...).
    #[error("format error: {0}")]
    Format(String),

    /// File parsed but its payload does not match its own declaration.
    #[error("corrupt file: {0}")]
    Corrupt(String),

    /// Valid file of a kind we do not handle.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Record violates the data-model schema; names the offending field.
    #[error("schema error in field `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("lung mask is empty after processing (input does not look like a chest scan)")]
    EmptyMask,

    #[error("empty session: {0}")]
    EmptySession(String),

    #[error("session alignment error: no viewport state precedes the first gaze sample")]
    SessionAlignment,

    #[error("voxel ({0}, {1}, {2}) out of bounds for dims ({3}, {4}, {5})")]
    OutOfBounds(i64, i64, i64, usize, usize, usize),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate test: {0}")]
    DegenerateTest(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("infeasible simulation config: {0}")]
    InfeasibleConfig(String),

    #[error("sensitivity undefined: no ground-truth nodules in the evaluated set")]
    NoTruths,
}
