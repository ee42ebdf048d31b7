use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("timestamp {t} precedes window start {start}")]
    OutOfWindowBefore { t: i64, start: i64 },

    #[error("timestamp {t} is at or after window end {end}")]
    OutOfWindowAfter { t: i64, end: i64 },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),

    #[error("design matrix has no columns")]
    NoColumns,

    #[error("column `{name}` has {got} rows, expected {expected}")]
    LengthMismatch {
        name: String,
        got: usize,
        expected: usize,
    },

    #[error("input contains non-finite values")]
    NonFiniteInput,

    #[error("empty input")]
    EmptyInput,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(source_name: &str, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }
}
