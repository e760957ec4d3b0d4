//! Error types shared across the simulator.

use thiserror::Error;

/// Unified error for simulator operations.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid address: {0}")]
    InvalidAddress(String),

    #[error(
        "allocation failure on node {node}: requested {requested} words, {available} available"
    )]
    AllocationFailure {
        node: usize,
        requested: u64,
        available: u64,
    },

    #[error("context exhaustion: {demanded} thread contexts demanded, capacity {capacity}{}",
        .job_set.map(|n| format!(" (job set of {n})")).unwrap_or_default())]
    ContextExhaustion {
        demanded: u64,
        capacity: u64,
        /// Filled in by the query engine with the size of the job set that failed.
        job_set: Option<u64>,
    },

    #[error("use after termination of thread {0}")]
    UseAfterTermination(u64),

    #[error("verification failure: {0}")]
    VerificationFailure(String),

    #[error("scheduler stalled: {live} tasks alive but none runnable")]
    Stalled { live: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type SimResult<T> = Result<T, SimError>;

impl SimError {
    /// Attach the failing job-set size to a context-exhaustion error.
    pub fn with_job_set(self, jobs: u64) -> SimError {
        match self {
            SimError::ContextExhaustion {
                demanded, capacity, ..
            } => SimError::ContextExhaustion {
                demanded,
                capacity,
                job_set: Some(jobs),
            },
            other => other,
        }
    }

    /// True if this is the thread-context capacity failure mode.
    pub fn is_context_exhaustion(&self) -> bool {
        matches!(self, SimError::ContextExhaustion { .. })
    }
}
