use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The instance is too large for exhaustive enumeration.
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("unsupported function class: {0}")]
    UnsupportedClass(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("degenerate instance: {0}")]
    Degenerate(String),
    /// A structural invariant of the model does not hold.
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("parse error: {0}")]
    Parse(String),
}
