use thiserror::Error;

/// Errors raised by validation, solving and the file formats.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, found {found})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite entry in {what} at {index}")]
    NonFinite { what: &'static str, index: String },
    #[error("negative bias: {which}[{index}] = {value}")]
    NegativeBias {
        which: &'static str,
        index: usize,
        value: f64,
    },
    #[error("invalid rho: {0} (must be finite and > 0)")]
    InvalidRho(f64),
    #[error("duplicate source index {0}")]
    DuplicateSource(usize),
    #[error("duplicate target index {0}")]
    DuplicateTarget(usize),
    #[error("index out of range: ({row}, {col}) for a {m}x{n} problem")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        m: usize,
        n: usize,
    },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("size guard exceeded: {what} ({value} > {limit})")]
    GuardExceeded {
        what: &'static str,
        value: u128,
        limit: u128,
    },
    #[error("count overflow: number of partial assignments for {m}x{n} exceeds 2^63-1")]
    CountOverflow { m: usize, n: usize },
    #[error("entry out of range in {what} at {index}: {value}")]
    OutOfRange {
        what: &'static str,
        index: String,
        value: f64,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("near-kink: {0}")]
    NearKink(String),
    #[error("undefined recall: ground truth has no matches")]
    UndefinedRecall,
    #[error("invalid file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
