use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid model, discount, grid, solver or path configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An operation was called outside of its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The discretisation breaks the sign pattern of an M-matrix.
    #[error("assembly failed at node (i_r={i_r}, i_z={i_z}): {reason}")]
    Assembly {
        i_r: usize,
        i_z: usize,
        reason: String,
    },

    /// The penalty iteration did not settle within the iteration budget.
    #[error("penalty iteration did not converge after {iterations} iterations (last sup-norm change {last:.3e})")]
    NonConvergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    /// Quadrature or other numerical failure.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
