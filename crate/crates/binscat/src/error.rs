//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate partition: {0}")]
    DegeneratePartition(String),

    #[error("evaluation point {x} outside the partition support [{lo}, {hi}]")]
    OutOfSupport { x: f64, lo: f64, hi: f64 },

    #[error("derivative order {v} exceeds basis degree {p}")]
    InvalidDerivative { v: usize, p: usize },

    #[error("unsupported smoothness s={s} for degree p={p}; only s=0 and s=p are available")]
    UnsupportedSmoothness { s: usize, p: usize },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("singular curvature: {0}")]
    SingularCurvature(String),

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("no convergence after {iterations} iterations (grad inf-norm {grad_inf:.3e})")]
    NoConvergence { iterations: usize, grad_inf: f64 },

    #[error("polynomial order {0} not supported (coefficients tabled up to 8)")]
    UnsupportedOrder(usize),

    #[error("null-model fit failed: {0}")]
    NullFitFailure(String),

    #[error("group {0} is empty")]
    EmptyGroup(String),

    #[error("groups have no common support")]
    NoCommonSupport,

    #[error("file error: {0}")]
    FileError(String),

    #[error("schema error: {0}")]
    SchemaError(String),

    #[error("dataset has fewer than 2 usable rows after dropping incomplete ones")]
    EmptyData,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Process exit code for the CLI: 2 for validation problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SingularCurvature(_)
            | Error::SingularSystem(_)
            | Error::NoConvergence { .. } => 3,
            _ => 2,
        }
    }
}
