use thiserror::Error;

/// Everything the harness can fail with. [`HarnessError::exit_code`] maps
/// each variant to the process exit status.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),
    #[error("experiment file, line {line}: {message}")]
    Spec { line: usize, message: String },
    #[error("no cached set family for N = {n} at {path}; run the `sets` subcommand first")]
    MissingCache { n: usize, path: String },
    #[error("cache file {path} is unusable: {reason}")]
    BadCache { path: String, reason: String },
    #[error("transcript: {0}")]
    Transcript(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Source(#[from] polarsec_core::SourceError),
    #[error(transparent)]
    Sets(#[from] polarsec_core::SetsError),
    #[error(transparent)]
    Chain(#[from] polarsec_core::ChainError),
    #[error(transparent)]
    Metrics(#[from] polarsec_core::MetricsError),
    #[error("{0} hard invariant(s) failed")]
    Invariant(usize),
}

impl HarnessError {
    /// 1 for a failed hard invariant, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Invariant(_) => 1,
            _ => 2,
        }
    }
}
