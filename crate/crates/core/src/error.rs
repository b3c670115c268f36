use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("mass balance violated for x = {x:.4}: residual {residual:.3e}; increase {parameter}")]
    MassBalance {
        x: f64,
        residual: f64,
        parameter: &'static str,
    },

    #[error("row mass check failed: max deviation {deviation:.3e} from {expected:.6}; refine {parameter}")]
    RowMass {
        deviation: f64,
        expected: f64,
        parameter: &'static str,
    },

    #[error("bisection bracket failed: δ ranges over [{lo:.6e}, {hi:.6e}] but target is {target:.6e}")]
    Bracket { lo: f64, hi: f64, target: f64 },

    #[error("inconsistent tables: {0}")]
    Inconsistent(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("artifact {path}: {reason}")]
    Artifact { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
