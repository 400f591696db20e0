use thiserror::Error;

use crate::posture::PostureLabel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("invalid label {0:?}")]
    InvalidLabel(String),
    #[error("cannot stratify: class {label} has {count} row(s), need at least 2")]
    Stratification { label: PostureLabel, count: usize },
    #[error("label mismatch: {segments} occupied segments but only {labels} scheduled postures")]
    LabelMismatch { segments: usize, labels: usize },
    #[error("insufficient classes: missing {0:?}")]
    InsufficientClasses(Vec<PostureLabel>),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("artifact corrupted: {0}")]
    Corruption(String),
    #[error("unsupported artifact version {found} (this build reads version {supported})")]
    Version { found: u16, supported: u16 },
    #[error("session {0} not found")]
    NotFound(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line()).unwrap_or(0);
        match err.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            kind => Error::Parse { line, message: format!("{kind:?}") },
        }
    }
}
