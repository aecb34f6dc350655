use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("target aggregation index {target} is infeasible: achievable range is [{min}, {max}]")]
    Infeasible { target: u64, min: u64, max: u64 },

    #[error(
        "landscape generator did not reach s = {target} within {iterations} iterations (closest: {best})"
    )]
    Convergence {
        target: u64,
        best: u64,
        iterations: u64,
    },

    #[error("ensemble member k = {k}: {source}")]
    Ensemble {
        k: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("landscape parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("linear solve did not converge: relative residual {residual:e} > {tol:e}")]
    LinearSolve { residual: f64, tol: f64 },

    #[error("non-finite density at node {node} (t = {t})")]
    NonFinite { node: usize, t: f64 },

    #[error("negative undershoot {value:e} at node {node} (t = {t}); time step too large")]
    Undershoot { node: usize, value: f64, t: f64 },

    #[error("solve failed at t = {t}: {source}")]
    AtTime {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("sweep job (landscape k = {k}, intensity = {intensity}): {source}")]
    SweepJob {
        k: usize,
        intensity: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Innermost error, skipping the context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Ensemble { source, .. }
            | Error::AtTime { source, .. }
            | Error::SweepJob { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerical integration itself.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::LinearSolve { .. } | Error::NonFinite { .. } | Error::Undershoot { .. }
        )
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self.root(), Error::Infeasible { .. } | Error::Convergence { .. })
    }
}
