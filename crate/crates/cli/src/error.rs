use std::fmt;
use std::path::Path;

use iphoton_core::Error as CoreError;

/// Failure of a command, carrying its exit code class.
#[derive(Debug)]
pub enum CliError {
    /// Invalid or unreadable configuration (exit 2).
    Config(String),
    /// File-system failure (exit 3).
    Io(String),
    /// Inputs disagree with each other or with the configuration (exit 4).
    Data(String),
    /// Outputs of an earlier stage are absent (exit 5).
    MissingStage(Vec<String>),
    /// Any other computation failure (exit 1).
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Failed(_) => 1,
            Self::Config(_) => 2,
            Self::Io(_) => 3,
            Self::Data(_) => 4,
            Self::MissingStage(_) => 5,
        }
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        Self::Io(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Io(m) => write!(f, "i/o error: {m}"),
            Self::Data(m) => write!(f, "data error: {m}"),
            Self::MissingStage(missing) => {
                writeln!(f, "missing outputs of an earlier stage:")?;
                for m in missing {
                    writeln!(f, "  {m}")?;
                }
                Ok(())
            }
            Self::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Io(m) => Self::Io(m),
            CoreError::GridMismatch(_)
            | CoreError::Format(_)
            | CoreError::Pairing { .. }
            | CoreError::Data(_)
            | CoreError::EmptyDataset => Self::Data(e.to_string()),
            other => Self::Failed(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
