use thiserror::Error;

use crate::expr::ExprError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{context}: {source}")]
    Expr {
        context: String,
        #[source]
        source: ExprError,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("gamma function pole at {0}")]
    Pole(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{what} did not converge: {detail}")]
    NonConvergence { what: &'static str, detail: String },
    #[error("Newton iteration failed at time step {step} (t = {t})")]
    NewtonFailure { step: usize, t: f64 },
    #[error("no stationary point of the Hamiltonian found at node {node} (t = {t})")]
    NoStationaryPoint { node: usize, t: f64 },
    #[error("singular linear system at row {row} (condition estimate {condition:e})")]
    Singular { row: usize, condition: f64 },
}

impl Error {
    pub(crate) fn expr(context: impl Into<String>, source: ExprError) -> Self {
        Error::Expr {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
