use thiserror::Error;

/// Errors raised by the solvers and checks in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("evaluation at t = {t} is outside the domain of {name}")]
    Domain { name: String, t: f64 },

    #[error("singular evaluation: {0}")]
    Singular(String),

    #[error("operation requires a class {expected} nonlinearity")]
    WrongClass { expected: &'static str },

    #[error("nonlinearity is not log-convex")]
    NotLogConvex,

    #[error("search failed: {0}")]
    SearchFailure(String),

    #[error("banded factorization hit a zero pivot at row {0}")]
    SingularMatrix(usize),

    #[error("newton did not converge after {iters} iterations (residual {residual:e})")]
    NonConvergence { iters: usize, residual: f64 },

    #[error("iterate left the admissible domain (max u = {max_u})")]
    DomainExit { max_u: f64 },

    #[error("contraction estimate {rate} >= 1, lambda too large for the fixed-point construction")]
    NoContraction { rate: f64 },

    #[error("internal consistency violated: {0}")]
    Consistency(String),

    #[error("eigensolver stagnated after {0} iterations")]
    EigenStagnation(usize),

    #[error("continuation step size underflow at lambda = {lambda}")]
    StepFailure { lambda: f64 },

    #[error("{0} unavailable")]
    Unavailable(String),
}

pub type Result<T> = std::result::Result<T, Error>;
