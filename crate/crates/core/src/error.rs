use thiserror::Error;

/// Errors raised by problem evaluation, the one-step maps and the verification drivers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CpdError {
    #[error("field strength parameter eps = {0} is outside (0, 1]")]
    InvalidEpsilon(f64),
    #[error("unknown problem id `{0}`")]
    UnknownProblem(String),
    #[error("unknown method id `{0}`")]
    UnknownMethod(String),
    #[error("position is on the singular axis of the potential (r = {r:e})")]
    Singular { r: f64 },
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("fixed-point iteration diverged after {iterations} sweeps (iterate norm {norm:e})")]
    Divergence { iterations: usize, norm: f64 },
    #[error("step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<CpdError>,
    },
    #[error("oracle self-check failed: half-step rerun differs by {diff:e} (tolerance {tol:e})")]
    OracleMismatch { diff: f64, tol: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = CpdError> = std::result::Result<T, E>;
