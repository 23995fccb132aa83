use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{}:{line}: expected {expected} feature columns, found {got}", path.display())]
    DimensionMismatch {
        path: PathBuf,
        line: u64,
        expected: usize,
        got: usize,
    },
    #[error("{}: malformed header, expected columns `{expected}`, found `{found}`", path.display())]
    Header {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    /// A configuration file or flag combination that cannot be run.
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] coreset_core::Error),
    #[error("{} of {total} sweep combinations failed:\n{}", failures.len(), failures.join("\n"))]
    SweepFailures { total: usize, failures: Vec<String> },
}

pub type Result<T> = std::result::Result<T, BenchError>;

impl BenchError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        BenchError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit code: 2 for usage and configuration problems, 1 for
    /// everything that went wrong while doing the work.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Core(coreset_core::Error::Config { .. }) => 2,
            _ => 1,
        }
    }
}
