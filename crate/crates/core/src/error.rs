use crate::rational::ExactReal;

/// Errors shared across the crate.
///
/// Anything that carries a witness (a point, a distance, a pair) keeps it as
/// data so callers can report refutations instead of opaque failures.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point outside the finite domain (index {index}, domain size {size})")]
    PointOutsideDomain { index: usize, size: usize },

    #[error("pseudo-orbit defect {defect} exceeds the declared budget {delta}")]
    DefectExceedsDelta { defect: ExactReal, delta: ExactReal },

    #[error("constant refused: {0}")]
    RefusedConstant(String),

    #[error("oracle fault: output failed re-verification at bound {bound} (index {index}, deviation {deviation})")]
    OracleFault {
        bound: ExactReal,
        index: usize,
        deviation: ExactReal,
    },

    #[error("ball-inclusion violation: no preimage of the target within radius {radius} of the base point")]
    InclusionViolation { radius: ExactReal },

    #[error("iteration budget exhausted: {0}")]
    BudgetExceeded(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
