use thiserror::Error;

use crate::oracle::ExactSolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad topology, objective, scenario or bound parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument does not fit the network it is used with.
    #[error("usage error: {0}")]
    Usage(String),

    /// Exhaustive enumeration would exceed the configured cap.
    #[error("network has {nodes} nodes, enumeration cap is {cap}")]
    TooLarge { nodes: usize, cap: usize },

    /// A derivative or inverse was evaluated outside its domain.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("bisection bracket [{lo}, {hi}] does not contain a root for {player}")]
    Bracket { player: String, lo: f64, hi: f64 },

    #[error("did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Option<Box<ExactSolution>>,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    /// Process exit code: 1 for usage and configuration problems, 2 for
    /// numerical failures, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Usage(_) | Error::TooLarge { .. } | Error::Parse { .. } => 1,
            Error::Evaluation(_) | Error::Bracket { .. } | Error::NonConvergence { .. } => 2,
            Error::Io(_) | Error::Json(_) => 3,
        }
    }
}
