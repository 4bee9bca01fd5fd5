use std::path::PathBuf;

use thiserror::Error;

use crate::features::MetricName;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed JSON: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error("line {line}: schema error: {message}")]
    Schema { line: usize, message: String },

    #[error("line {line}: frame_index {found} does not follow {previous}")]
    Ordering {
        line: usize,
        previous: u64,
        found: u64,
    },

    #[error("line {line}: {field} = {value} is out of range")]
    Range {
        line: usize,
        field: String,
        value: f64,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("sequence too short: {frames} frames, at least {required} required")]
    SequenceTooShort { frames: usize, required: usize },

    #[error("degenerate calibration for {metric}: all {count} values equal {value}")]
    DegenerateCalibration {
        metric: MetricName,
        count: usize,
        value: f64,
    },

    #[error("calibration is missing the \"{0}\" record")]
    IncompleteCalibration(MetricName),

    #[error("invalid calibration bounds for {metric}: {message}")]
    InvalidBounds { metric: MetricName, message: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("{} rated video(s) have no score report: {}", .0.len(), .0.join(", "))]
    MissingReports(Vec<String>),

    #[error("ratings row {row}: {message}")]
    Rating { row: usize, message: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{}: {source}", path.display())]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Stable machine-readable code, used by the CLI error summary.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Schema { .. } => "schema",
            Error::Ordering { .. } => "ordering",
            Error::Range { .. } => "range",
            Error::Input(_) => "input",
            Error::SequenceTooShort { .. } => "sequence-too-short",
            Error::DegenerateCalibration { .. } => "degenerate-calibration",
            Error::IncompleteCalibration(_) => "incomplete-calibration",
            Error::InvalidBounds { .. } => "invalid-bounds",
            Error::LengthMismatch { .. } => "length-mismatch",
            Error::UndefinedCorrelation(_) => "undefined-correlation",
            Error::MissingReports(_) => "missing-reports",
            Error::Rating { .. } => "rating",
            Error::Csv(_) => "csv",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::InFile { source, .. } => source.kind(),
        }
    }

    pub(crate) fn in_file(path: impl Into<PathBuf>) -> impl FnOnce(Error) -> Error {
        let path = path.into();
        move |source| Error::InFile {
            path,
            source: Box::new(source),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
