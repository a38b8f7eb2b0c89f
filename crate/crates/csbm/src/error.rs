use thiserror::Error;

/// Errors surfaced by samplers, solvers, and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Model or algorithm parameters violate a precondition.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Experiment configuration is malformed (maps to CLI exit code 2).
    #[error("config error: {0}")]
    Config(String),

    /// A state and an instance disagree on dimensions or edge indexing.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A numerical guard tripped (non-positive variance, empty pool, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Iterative eigensolver did not reach the requested residual.
    #[error("eigensolver did not converge after {iters} iterations (residual {residual:.3e})")]
    NonConvergence { iters: usize, residual: f64 },

    /// A CSV or serialized file does not match the expected schema.
    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
