use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid carrier layout: {0}")]
    Layout(String),

    #[error("codebook: word {index} has length {found}, expected {expected}")]
    WordLength {
        index: usize,
        found: usize,
        expected: usize,
    },

    #[error("codebook: word {second} duplicates word {first}")]
    DuplicateWord { first: usize, second: usize },

    #[error("codebook: words {first} and {second} are at distance {distance} < {declared}")]
    DistanceViolation {
        first: usize,
        second: usize,
        distance: u32,
        declared: u32,
    },

    #[error("codebook parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("at least two words are required, got {0}")]
    TooFewWords(usize),

    #[error("length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("mask is inconsistent with layout: {0}")]
    Mask(String),

    #[error("signal has zero power")]
    ZeroPower,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("metadata: {0}")]
    Metadata(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for failures caused by the filesystem rather than by the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}
