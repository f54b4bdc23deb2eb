use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Syntax problem in a configuration file.
    #[error("config line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    /// A configuration value violates a semantic rule.
    #[error("invalid configuration: {rule}")]
    Validation { rule: String },

    #[error("observed data: {0}")]
    ObservedData(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("schedule does not cover weeks {start}..={end}")]
    ScheduleRange { start: u32, end: u32 },

    #[error("observed data does not cover days {first_day}..={last_day}")]
    ObservedCoverage { first_day: u32, last_day: u32 },

    #[error("evaluation of individual {index} failed: {source}")]
    Evaluation {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("restart file: {0}")]
    Restart(String),

    #[error("restart file checksum mismatch (stored {stored:#018x}, computed {computed:#018x})")]
    Checksum { stored: u64, computed: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub fn validation(rule: impl Into<String>) -> Self {
        Error::Validation { rule: rule.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a failed run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::ConfigParse { .. } | Error::Validation { .. } | Error::ObservedData(_)
        )
    }
}
