use thiserror::Error;

use crate::dsl::{DslError, EvalError};
use crate::meanfield::FixedPointTrace;

/// A precondition on an argument was violated.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid argument: {0}")]
pub struct InvalidArgument(pub String);

impl InvalidArgument {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertificateError {
    #[error(transparent)]
    InvalidArgument(#[from] InvalidArgument),
    /// The exponent of a constant exceeds the representable range of f64.
    #[error("certificate overflow: ln {name} = {log_value:e} is not representable")]
    Overflow { name: &'static str, log_value: f64 },
    #[error("infeasible certificate: {0}")]
    Infeasible(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegressionError {
    #[error("regression needs more paths ({paths}) than basis functions ({features})")]
    TooFewPaths { paths: usize, features: usize },
    #[error("rank-deficient design at node {node}: condition estimate {condition:e}")]
    RankDeficient { node: usize, condition: f64 },
    #[error("length mismatch: {0}")]
    Shape(String),
}

/// Why an outer fixed-point iteration stopped without meeting its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonConvergence {
    MaxIterations,
    NonContraction,
}

impl std::fmt::Display for NonConvergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NonConvergence::MaxIterations => f.write_str("iteration cap reached"),
            NonConvergence::NonContraction => {
                f.write_str("contraction ratio stayed >= 1 (map is not contracting)")
            }
        }
    }
}

#[derive(Debug, Clone, Error)]
pub enum SolveError {
    #[error(transparent)]
    InvalidArgument(#[from] InvalidArgument),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error("driver evaluation failed: {0}")]
    Driver(#[from] EvalError),
    #[error("implicit y-iteration diverged at node {node} after {iterations} iterations")]
    StepDivergence { node: usize, iterations: usize },
    #[error("non-finite value produced at node {node}")]
    NonFinite { node: usize },
    #[error(
        "window width {width:e} exceeds the certified epsilon {epsilon:e}; \
         pass the epsilon override to proceed anyway"
    )]
    WindowExceedsCertificate { width: f64, epsilon: f64 },
    #[error("fixed point did not converge: {reason} after {} iterations", trace.distances.len())]
    NotConverged {
        reason: NonConvergence,
        trace: Box<FixedPointTrace>,
    },
    #[error("scenario is incompatible with this solver: {0}")]
    Incompatible(String),
    #[error("window {index} failed: {source}")]
    Window {
        index: usize,
        #[source]
        source: Box<SolveError>,
    },
}

/// Top-level error of the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    InvalidArgument(#[from] InvalidArgument),
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("config error: {0}")]
    Config(String),
    #[error("fixture error: {0}")]
    Fixture(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the failure stems from user input rather than from a solver.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::Dsl(_)
                | Error::Config(_)
                | Error::Certificate(CertificateError::InvalidArgument(_))
                | Error::Solve(SolveError::Incompatible(_))
                | Error::Solve(SolveError::InvalidArgument(_))
                | Error::Solve(SolveError::WindowExceedsCertificate { .. })
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
