use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("column {column:?} not found in header of {path}")]
    MissingColumn { column: String, path: PathBuf },

    #[error("{path} contains no valid rows")]
    EmptyCorpus { path: PathBuf },

    #[error("invalid field {field:?} in {path} row {row}: {reason}")]
    InvalidField {
        field: String,
        path: PathBuf,
        row: usize,
        reason: String,
    },

    #[error("census aggregate has no surname with a positive count")]
    ZeroCensusWeight,

    #[error("percentage {value} for {label:?} of surname {surname:?} is outside [0, 100]")]
    PercentageOutOfRange {
        surname: String,
        label: String,
        value: f64,
    },

    #[error("percentages for surname {surname:?} sum to {sum}, above the 100.5 rounding slack")]
    PercentageSumTooLarge { surname: String, sum: f64 },

    #[error("cannot split {n} records with test fraction {fraction}: {side} set would be empty")]
    DegenerateSplit {
        n: usize,
        fraction: f64,
        side: &'static str,
    },

    #[error("cannot sample {requested} records from {available}")]
    SampleTooLarge { requested: usize, available: usize },

    #[error("cannot tokenize an empty name")]
    EmptyName,

    #[error("every bi-char was pruned; the vocabulary is empty")]
    EmptyVocabulary,

    #[error("label {label:?} is not in the label set")]
    UnknownLabel { label: String },

    #[error("expected {expected} {what}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("sequence index {index} is outside the vocabulary range {vocab_size}")]
    IndexOutOfRange { index: usize, vocab_size: usize },

    #[error("label index {index} is outside the {n_classes}-class label range")]
    LabelOutOfRange { index: usize, n_classes: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training set is empty")]
    EmptyTrainSet,

    #[error("non-finite gradient in tensor {tensor:?}")]
    NonFiniteGradient { tensor: &'static str },

    #[error("confusion matrix is empty")]
    EmptyMatrix,

    #[error("model file {path} is malformed: {reason}")]
    MalformedModel { path: PathBuf, reason: String },

    #[error("model file {path} has version {found}, this build supports version {supported}")]
    UnsupportedVersion {
        path: PathBuf,
        found: u32,
        supported: u32,
    },

    #[error("model file {path} failed its checksum (stored {stored:#010x}, computed {computed:#010x})")]
    ChecksumMismatch {
        path: PathBuf,
        stored: u32,
        computed: u32,
    },

    #[error("no contribution records to aggregate")]
    EmptyContributions,

    #[error("total contribution amount is zero; shares are undefined")]
    ZeroTotalAmount,
}

pub type Result<T> = std::result::Result<T, Error>;
