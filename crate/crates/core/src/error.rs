use crate::checkpoint::CheckpointError;
use crate::env::EnvError;
use crate::nn::NnError;
use crate::planner::PlanError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("config error in '{field}': {msg}")]
    Config { field: String, msg: String },
    #[error("config line {line}: {msg}")]
    ConfigSyntax { line: u64, msg: String },
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("non-finite {what} at env step {step} (seed {seed})")]
    NonFinite { what: &'static str, step: u64, seed: u64 },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }

    /// Process exit status for the command-line tool: 1 usage/config,
    /// 2 I/O or corrupt file, 3 planning failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::ConfigSyntax { .. } | Error::Env(EnvError::UnknownScenario(_)) | Error::Env(EnvError::Config(_)) => 1,
            Error::Plan(_) => 3,
            Error::Io(_) | Error::Csv(_) | Error::Parse { .. } | Error::Checkpoint(_) => 2,
            Error::Env(_) | Error::Nn(_) | Error::NonFinite { .. } => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
