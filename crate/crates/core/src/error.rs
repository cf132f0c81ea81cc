use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum CbiError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("quadrature failed to reach tolerance: {0}")]
    QuadratureFailure(String),
    #[error("cannot sample from a region of zero mass")]
    EmptyRegion,
    #[error("cannot sample from a region of infinite mass")]
    InfiniteMass,
    #[error("parameters are not admissible: {0}")]
    NotAdmissible(String),
    #[error("step size underflow at t = {t}: {reason}")]
    StepSizeUnderflow { t: f64, reason: String },
    #[error("matrix exponential overflow")]
    Overflow,
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("budget exceeded: {needed} path-steps requested, budget is {budget}")]
    BudgetExceeded { needed: u64, budget: u64 },
    #[error("schema error: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, CbiError>;

pub(crate) fn dim_check(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(CbiError::DimensionMismatch {
            what: what.to_string(),
            expected,
            found,
        })
    }
}
