use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("timestamp {got} does not follow newest window entry {newest}")]
    NonMonotoneTime { newest: u64, got: u64 },

    #[error("label for t={0} was already delivered")]
    DuplicateDelivery(u64),

    #[error("sample t={0} has already been queried")]
    DuplicateQuery(u64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid stream spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate budget schedule: b_high ({b_high}) and b_low ({b_low}) must bracket b ({b})")]
    DegenerateSchedule { b: f64, b_high: f64, b_low: f64 },

    #[error("statistics input: {0}")]
    InvalidSample(String),

    #[error("csv row {row}, column '{column}': {message}")]
    CsvCell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("config file: {0}")]
    Toml(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for errors caused by the file system rather than by user input.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Csv(_))
    }
}
