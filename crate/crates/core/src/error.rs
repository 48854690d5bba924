use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vector norm {norm:e} is below the zero threshold")]
    ZeroVector { norm: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("batch of size {size} is too small (need at least 2)")]
    BatchTooSmall { size: usize },

    #[error("empty list")]
    EmptyList,

    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("list of length {len} exceeds the enumeration cap of {cap}")]
    ListTooLarge { len: usize, cap: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("alpha must lie in [0, 1], got {0}")]
    AlphaOutOfRange(f64),

    #[error("invalid loss weight {name} = {value}")]
    InvalidWeight { name: &'static str, value: f64 },

    #[error("token list is empty")]
    EmptyTokenList,

    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenIdOutOfRange { id: usize, vocab_size: usize },

    #[error("backward pass requires the cached forward state")]
    MissingCache,

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("teacher '{teacher}' has no embedding for sentence {sentence:?}")]
    TeacherCoverageGap { teacher: String, sentence: String },

    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("{}: invalid UTF-8", .0.display())]
    EncodingError(PathBuf),

    #[error("{path}:{line}: {message}")]
    FormatError {
        path: String,
        line: usize,
        message: String,
    },

    #[error("duplicate sentence key {0:?}")]
    DuplicateKey(String),

    #[error("line {line}: score {score} outside [0, 5]")]
    ScoreOutOfRange { line: usize, score: f64 },

    #[error("sentence is empty")]
    EmptySentence,

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("gold relevance must be nonnegative, got {0}")]
    NegativeGold(f64),

    #[error("empty input")]
    EmptyInput,

    #[error("pool of size {size} is too small (need at least 2)")]
    PoolTooSmall { size: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::FormatError {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
