use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graphs have different node counts: {0} vs {1}")]
    NodeCountMismatch(usize, usize),

    #[error("invalid switching signal: {0}")]
    InvalidSignal(String),

    #[error("time {t} outside signal horizon [0, {horizon}]")]
    OutOfHorizon { t: f64, horizon: f64 },

    #[error("window length must be positive, got {0}")]
    NonPositiveWindow(f64),

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("polynomial degree must be at least 1")]
    DegenerateDegree,

    #[error("coefficient vector must be non-empty")]
    EmptyCoefficients,

    #[error("the pair (A, B) is not controllable")]
    NotControllable,

    #[error("the pair (A, C) is not observable")]
    NotObservable,

    #[error("matrix is not stochastic within tolerance {tol}: {reason}")]
    NotStochastic { tol: f64, reason: String },

    #[error("transition interval is reversed: {from} > {to}")]
    ReversedInterval { from: f64, to: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("switching signal is not balanced: graph {0} has nonzero Laplacian column sums")]
    NotBalanced(usize),
}
