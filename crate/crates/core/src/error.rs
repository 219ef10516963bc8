use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two operands disagree on zone system or dimensions.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A value or parameter lies outside its admissible range.
    #[error("range error: {0}")]
    Range(String),

    #[error("usage error: {0}")]
    Usage(String),

    /// Malformed numeric input (non-finite, negative where forbidden).
    #[error("input error: {0}")]
    Input(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("no path from zone {origin} to zone {destination}")]
    Connectivity { origin: String, destination: String },

    /// Text parse failure; `line` is 1-based, 0 when unknown.
    #[error("{}parse error at line {line}: {message}", source_prefix(.source_name))]
    Parse {
        source_name: Option<String>,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Engine or demand failure wrapped with the loop position it occurred at.
    #[error("scenario {scenario}, iteration {index}: {source}")]
    Iteration {
        scenario: String,
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

fn source_prefix(name: &Option<String>) -> String {
    match name {
        Some(n) => format!("{n}: "),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: None,
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach a file name to a parse error so messages read `file: parse error at line N`.
    pub fn with_source_name(self, name: impl Into<String>) -> Self {
        match self {
            Error::Parse { line, message, .. } => Error::Parse {
                source_name: Some(name.into()),
                line,
                message,
            },
            other => other,
        }
    }

    pub(crate) fn in_iteration(self, scenario: &str, index: usize) -> Self {
        Error::Iteration {
            scenario: scenario.to_string(),
            index,
            source: Box::new(self),
        }
    }

    pub(crate) fn from_toml(err: toml::de::Error, text: &str) -> Self {
        let line = err
            .span()
            .map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        Error::parse(line, err.message().trim().to_string())
    }
}
