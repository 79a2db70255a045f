use thiserror::Error;

/// Errors raised by grid construction, state handling, the solvers and the
/// verification battery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("kernel is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("eigenvalue {value:.3e} below the admissible floor; the state is not positive semidefinite")]
    NegativeEigenvalue { value: f64 },

    #[error("value {value} outside the entropy domain ({kind})")]
    EntropyDomain { value: f64, kind: &'static str },

    #[error("local density vanishes at node {node}; cannot rescale")]
    ZeroDensity { node: usize },

    #[error("perturbation parameter {t:.3e} outside the admissible window [{lo:.3e}, {hi:.3e}]")]
    PerturbationWindow { t: f64, lo: f64, hi: f64 },

    #[error("degenerate state: {0}")]
    Degenerate(String),

    #[error("newton jacobian is singular: {0}")]
    SingularJacobian(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("line search failed at iteration {iteration} (residual {residual:.3e})")]
    LineSearch { iteration: usize, residual: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
