use std::path::PathBuf;

use thiserror::Error;

use crate::tune::TraceEntry;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: row {row}, column '{column}': {reason}")]
    Ingest { path: PathBuf, row: usize, column: String, reason: String },
    #[error("no weight setting satisfies the constraints ({} evaluations traced)", trace.len())]
    Infeasible { trace: Vec<TraceEntry> },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] costregime::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use costregime::Error as E;
        match self {
            CliError::Config(_) | CliError::Ingest { .. } => 2,
            CliError::Infeasible { .. } => 3,
            CliError::Core(e) => match e {
                E::TerminalState | E::BudgetExceeded { .. } => 1,
                _ => 2,
            },
            CliError::Io { .. } | CliError::Failed(_) => 1,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
