use std::fmt;

use thiserror::Error;

/// A single rejected input line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: u64,
    pub message: String,
}

impl LineError {
    pub fn new(line: u64, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// All rejected lines of one parse, in input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseErrors(pub Vec<LineError>);

impl ParseErrors {
    pub fn first_line(&self) -> Option<u64> {
        self.0.first().map(|e| e.line)
    }
}

impl fmt::Display for ParseErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("window starting at row {start} with height {delta} is out of bounds for {rows} rows")]
    Bounds {
        start: usize,
        delta: usize,
        rows: usize,
    },
    #[error("parse error: {0}")]
    Parse(ParseErrors),
    #[error("invalid {what}: {reason}")]
    Validation { what: &'static str, reason: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("extraction error: {0}")]
    Extraction(String),
    #[error("sampling error: {0}")]
    Sampling(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("training error: {0}")]
    Training(String),
    #[error("split error: {0}")]
    Split(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn parse_at(line: u64, message: impl Into<String>) -> Self {
        Error::Parse(ParseErrors(vec![LineError::new(line, message)]))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
