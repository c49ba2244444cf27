use crate::factor::FactorId;
use crate::key::VariableKey;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("variable {0} already exists")]
    DuplicateVariable(VariableKey),
    #[error("factor references missing variable {0}")]
    DanglingEdge(VariableKey),
    #[error("noise model is not symmetric positive definite: {0}")]
    BadNoiseModel(&'static str),
    #[error("{kind} factor expects {expected} variables, got {got}")]
    ArityError {
        kind: &'static str,
        expected: &'static str,
        got: usize,
    },
    #[error("estimate has no entry for {0}")]
    IncompleteEstimate(VariableKey),
    #[error("value for {0} has the wrong shape for this factor")]
    StateMismatch(VariableKey),
    #[error("normal equations are singular at column {column}")]
    SingularSystem { column: usize },
    #[error("solver failed at iteration {iteration}: {source}")]
    SolverFailed {
        iteration: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
    #[error("receiver and satellite positions coincide")]
    DegenerateGeometry,
    #[error("observation of {0} carries no carrier-phase range")]
    MissingObservable(crate::key::SatId),
    #[error("between factor links epochs {prev} and {next}, which are not consecutive")]
    EpochGapError { prev: u32, next: u32 },
    #[error("kernel cannot be used here: {0}")]
    KernelMisuse(&'static str),
    #[error("unknown variable {0}")]
    UnknownVariable(VariableKey),
    #[error("unknown factor {0}")]
    UnknownFactor(FactorId),
    #[error("epoch {got} arrived after epoch {last}")]
    EpochOrderError { last: u32, got: u32 },
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("no satellite geometry with GDOP below the limit after {0} attempts")]
    GeometryError(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::SolverFailed {
            iteration,
            source: alloc::boxed::Box::new(self),
        }
    }
}
