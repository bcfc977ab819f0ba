use thiserror::Error;

/// Errors raised by operators, solvers, generators and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("schedule condition violated: {0}")]
    Schedule(String),

    #[error("inner solver stopped after {iterations} iterations with residual {residual:e}")]
    InnerNotConverged {
        residual: f64,
        iterations: usize,
        best: Vec<f64>,
    },

    #[error(
        "tolerance {tol:e} not reached within {iterations} iterations (residual {residual:e})"
    )]
    ToleranceUnreachable {
        tol: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("reference solution unavailable: {0}")]
    MissingReference(String),

    #[error("point is not feasible: {0}")]
    Infeasible(String),

    #[error("linear system is singular: {0}")]
    Singular(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension {
            context,
            expected,
            got,
        });
    }
    Ok(())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
