use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: expected {expected} tab-separated columns, found {found}")]
    MalformedRow { line: usize, expected: usize, found: usize },

    #[error("line {line}: unknown label {token:?}")]
    UnknownLabel { line: usize, token: String },

    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },

    #[error("line {line}: empty id")]
    EmptyId { line: usize },

    #[error("missing header line")]
    MissingHeader,

    #[error("split requires {required} annotations but only {available} are available")]
    InsufficientData { required: usize, available: usize },

    #[error("annotation {id:?} has no label")]
    Unlabeled { id: String },

    #[error("invalid emoticon table: {0}")]
    EmoticonTable(String),

    #[error("invalid polarity lexicon: {0}")]
    Lexicon(String),

    #[error("invalid vocabulary: {0}")]
    Vocabulary(String),

    #[error("vocabulary max_size {0} leaves no room for words (minimum 193)")]
    VocabTooSmall(usize),

    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,

    #[error("index {index} out of range for vocabulary of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("dropout rate {0} must lie in [0, 1)")]
    DropoutRate(f64),

    #[error("backward pass requires a training-mode forward trace")]
    MissingTrace,

    #[error("non-finite gradient in {array}")]
    NonFiniteGradient { array: String },

    #[error("class {0} has zero count; cannot compute inverse-frequency weight")]
    ZeroClassCount(crate::corpus::Label),

    #[error("invalid training configuration: {0}")]
    Config(String),

    #[error("epoch {epoch}, batch {batch}: {source}")]
    Training {
        epoch: usize,
        batch: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("gold and predicted label sequences differ in length ({gold} vs {pred})")]
    LengthMismatch { gold: usize, pred: usize },

    #[error("cannot evaluate an empty set of predictions")]
    EmptyEvaluation,

    #[error("ids not matched between gold and predictions: {}", .0.join(", "))]
    UnmatchedIds(Vec<String>),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
