use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field does not belong to this domain: {0}")]
    DomainMismatch(String),

    #[error("field contains a non-finite value at node {0}")]
    NonFinite(usize),

    #[error("{solver} did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),

    #[error("field is one-signed ({0} part vanishes); use the scalar Nehari projection instead")]
    OneSigned(&'static str),

    #[error("no sign-certified box found after {0} halvings/doublings")]
    NoBracket(usize),

    #[error("field is not on the nodal Nehari set (residual {residual:.3e} > {tolerance:.3e})")]
    NotOnNehariSet { residual: f64, tolerance: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
