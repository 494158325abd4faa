use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("non-finite value in {context} at ({row}, {col})")]
    NonFinite {
        context: String,
        row: usize,
        col: usize,
    },

    #[error("eigensolver did not converge after {iterations} restarts (residuals: {residuals:?})")]
    Convergence {
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("resource exhaustion: {0}")]
    Resource(String),

    #[error("stage {stage_id} failed in partition {partition_id}: {message}")]
    StageFailed {
        stage_id: usize,
        partition_id: usize,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error(
        "negative entry {value} in block {partition} (global row {row}, column {col}); \
         nonnegative input required"
    )]
    NegativeEntry {
        partition: usize,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("{path}: format error at byte offset {offset}: {message}")]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("{path}: truncated payload, expected {expected} bytes but found {actual}")]
    Length {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("{path}: parse error at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
