use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An input is outside the domain of the operation (zero vector, non-SPD matrix, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// Cyclic Jacobi hit its sweep cap before the off-diagonal mass fell below threshold.
    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_diagonal:e})")]
    NoConvergence { sweeps: usize, off_diagonal: f64 },

    /// The reduced matrix has more (or fewer) than one eigenvalue below the null cutoff.
    #[error("expected exactly one null eigenvalue of H*, found {count} below cutoff {cutoff:e}")]
    NullRank { count: usize, cutoff: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
