use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("target is not a strictly positive probability vector: {0}")]
    NonSimplexTarget(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("value bound must be positive and finite, got {0}")]
    NonpositiveBound(f64),

    #[error("envy budget epsilon must be non-negative, got {0}")]
    NegativeEpsilon(f64),

    #[error("invalid envy budget: {0}")]
    InvalidBudget(String),

    #[error("recipient index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid problem: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("csv source exhausted: requested {requested} rows, {remaining} remaining")]
    ExhaustedCsvSource { requested: usize, remaining: usize },

    #[error("missing or malformed header (expected x1,...,xn)")]
    MissingHeader,

    #[error("ragged row at line {0}")]
    RaggedRow(usize),

    #[error("non-numeric field at line {line}, column {column}")]
    NonNumericField { line: usize, column: usize },

    #[error("empty file")]
    EmptyFile,

    #[error("split sizes sum to {requested}, but the sample set has {rows} rows")]
    SizesExceedRows { requested: usize, rows: usize },

    #[error("baseline welfare must be positive, got {0}")]
    NonpositiveBaseline(f64),

    #[error("line search did not reach tolerance within {iterations} iterations (best loss {best_loss})")]
    MaxIterationsExceeded {
        iterations: usize,
        best_loss: f64,
        best: Vec<f64>,
    },

    #[error("malformed dual file: {0}")]
    MalformedDualFile(String),

    #[error("unsupported dual file version {0:?}")]
    VersionMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by input data (files, streams) rather than by
    /// the problem or run configuration.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::ExhaustedCsvSource { .. }
                | Error::MissingHeader
                | Error::RaggedRow(_)
                | Error::NonNumericField { .. }
                | Error::EmptyFile
                | Error::MalformedDualFile(_)
                | Error::VersionMismatch(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}
