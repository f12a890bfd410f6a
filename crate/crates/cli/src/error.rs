use std::io;
use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },

    #[error(transparent)]
    Core(#[from] relay_stopping::Error),
}

impl CliError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Re-homes a core validation error under the config section it came from.
    pub fn in_section(section: &str, err: relay_stopping::Error) -> Self {
        match err {
            relay_stopping::Error::InvalidParameter { name, reason } => {
                let field = if name.contains('.') {
                    name.to_string()
                } else {
                    format!("{section}.{name}")
                };
                CliError::Config { field, reason }
            }
            other => CliError::Core(other),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Read { .. } | CliError::Write { .. } | CliError::Csv { .. } => "io",
            CliError::Core(relay_stopping::Error::SolverFailure { .. }) => "solver",
            CliError::Core(relay_stopping::Error::InsufficientData(_)) => "insufficient-data",
            CliError::Core(_) => "model",
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            error: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            field: Option<&'a str>,
            message: String,
        }
        let field = match self {
            CliError::Config { field, .. } => Some(field.as_str()),
            _ => None,
        };
        let report = Report {
            error: self.kind(),
            field,
            message: self.to_string(),
        };
        serde_json::to_string(&report).unwrap_or_else(|_| self.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
