use std::path::PathBuf;

use ehsched_core::Error as CoreError;
use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: line {line}: {msg}")]
    Parse { path: String, line: u64, msg: String },

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> CliError {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> CliError {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for bad input, 3 for solver non-convergence, 4 for refused resource
    /// caps, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Parse { .. } => 2,
            CliError::Core(e) => match e {
                CoreError::NonConvergence { .. } => 3,
                CoreError::ResourceCap { .. } | CoreError::HorizonTooLarge { .. } => 4,
                CoreError::InvalidArgument(_)
                | CoreError::UnsupportedPolicy(_)
                | CoreError::UnknownScenario { .. }
                | CoreError::ReducibleChain => 2,
                CoreError::InfeasibleDecision { .. } | CoreError::UndefinedEfficiency => 1,
            },
            CliError::Io { .. } => 1,
        }
    }
}
