use crate::calendar::CivilDate;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid date `{0}`")]
    InvalidDate(String),
    #[error("invalid date range {start}..{end}")]
    InvalidRange { start: CivilDate, end: CivilDate },
    #[error("year {0} outside the supported range 1583..=4099")]
    YearOutOfRange(i32),
    #[error("no similar day exists for {0}")]
    NoSimilarDay(CivilDate),

    #[error("line {line}: {message}")]
    MalformedRow { line: u64, message: String },
    #[error("duplicate date {0}")]
    DuplicateDate(CivilDate),
    #[error("gap in coverage: no data between {after} and {before}")]
    Gap { after: CivilDate, before: CivilDate },
    #[error("series is empty")]
    EmptySeries,
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),
    #[error("missing history: {date} needs {needed}")]
    MissingHistory { date: CivilDate, needed: CivilDate },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("matrix factorization failed: {0}")]
    Factorization(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("column mismatch: model expects {expected} columns, got {found}")]
    ColumnMismatch { expected: usize, found: usize },
    #[error("length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("every candidate in the grid failed: {0}")]
    AllCandidatesFailed(String),
    #[error("test-period leakage: {0}")]
    Leakage(String),
    #[error("date misalignment: {0}")]
    Misaligned(String),
    #[error("unsupported format version {0}")]
    FormatVersion(u32),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}
