use std::io;

use thiserror::Error;

/// Errors produced by the detection toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("degenerate patch: {0}")]
    DegeneratePatch(&'static str),

    #[error("pixel {index} lies within {delta:e} of the patch mean (MAD kink)")]
    KinkProximity { index: usize, delta: f64 },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("label must be +1 or -1, got {0}")]
    InvalidLabel(f64),

    #[error("filter count must be in 1..=4, got {0}")]
    InvalidFilterCount(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset must contain both positive and negative samples")]
    SingleClassDataset,

    #[error("every sample in a batch was degenerate")]
    AllDegenerateBatch,

    #[error("filter is flat (zero variance after centering)")]
    FlatFilter,

    #[error("expected a {expected} sample")]
    WrongLabel { expected: &'static str },

    #[error("input is empty")]
    EmptyInput,

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("no ground-truth targets in the evaluated frames")]
    NoTruths,

    #[error("corrupt header: {0}")]
    CorruptHeader(String),

    #[error("file truncated: {0}")]
    TruncatedFile(String),

    #[error("unsupported version {found} (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
