//! Error types and exit codes.

use std::fmt;
use std::path::PathBuf;

/// One violated configuration invariant, located by its key path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    /// Dotted key path such as `noise.kind`.
    pub path: String,
    /// What is wrong with it.
    pub message: String,
}

impl ConfigIssue {
    pub(crate) fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Errors surfaced by the simulator front end.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    /// The configuration is invalid; every issue is listed.
    #[error("invalid configuration:\n{}", format_issues(.0))]
    Config(Vec<ConfigIssue>),
    /// Filesystem failure.
    #[error("{}: {source}", .path.display())]
    Io {
        /// Path being accessed.
        path: PathBuf,
        /// Underlying error.
        source: std::io::Error,
    },
    /// A file exists but does not have the expected format.
    #[error("{}: {message}", .path.display())]
    Format {
        /// Offending file.
        path: PathBuf,
        /// Description.
        message: String,
    },
    /// Failure inside the training core.
    #[error(transparent)]
    Core(#[from] flr_core::Error),
    /// Runs that cannot be compared.
    #[error("compare: {0}")]
    Compare(String),
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl SimError {
    /// Process exit code: 2 for validation errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        SimError::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Result alias for the simulator crate.
pub type Result<T> = std::result::Result<T, SimError>;
