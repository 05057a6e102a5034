use std::io;

use crate::volume::Axis;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: &'static str, found: [u8; 4] },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("invalid label byte {0} (allowed: 0, 1, 2)")]
    InvalidLabel(u8),

    #[error("invalid header: {0}")]
    InvalidHeader(String),

    #[error("container holds {found}, expected {expected}")]
    WrongKind { expected: &'static str, found: &'static str },

    #[error("dimensions must be positive, got {0:?}")]
    EmptyDims(Vec<usize>),

    #[error("data length {len} does not match dims {dims:?}")]
    LengthMismatch { dims: Vec<usize>, len: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    #[error("duplicate axis {0:?}")]
    DuplicateAxis(Axis),

    #[error("need at least {needed} annotation entries, got {got}")]
    TooFewEntries { needed: usize, got: usize },

    #[error("probability {0} outside [0, 1]")]
    ProbabilityRange(f64),

    #[error("dims {dims:?} not divisible by {factor}")]
    NotDivisible { dims: [usize; 3], factor: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Stable machine-readable identifier, used by the command-line tool.
    pub fn code(&self) -> &'static str {
        match self {
            Error::BadMagic { .. } => "bad_magic",
            Error::Truncated { .. } => "truncated",
            Error::InvalidLabel(_) => "invalid_label",
            Error::InvalidHeader(_) => "invalid_header",
            Error::WrongKind { .. } => "wrong_kind",
            Error::EmptyDims(_) => "empty_dims",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::OutOfBounds(_) => "out_of_bounds",
            Error::DuplicateAxis(_) => "duplicate_axis",
            Error::TooFewEntries { .. } => "too_few_entries",
            Error::ProbabilityRange(_) => "probability_range",
            Error::NotDivisible { .. } => "not_divisible",
            Error::NonFinite(_) => "non_finite",
            Error::Parse { .. } => "parse",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Io(_) => "io",
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite(_))
    }
}
