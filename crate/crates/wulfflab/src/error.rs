use thiserror::Error;

#[derive(Debug, Error)]
pub enum WulffError {
    /// Input outside the mathematical domain of an operation (zero direction,
    /// nonpositive mass, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// Degenerate or inconsistent discrete geometry.
    #[error("geometry error: {0}")]
    Geometry(String),
    /// A required evaluator (e.g. a Hessian) is not available.
    #[error("capability error: {0}")]
    Capability(String),
    /// An iterative method failed to reach its tolerance.
    #[error("non-convergence: {0}")]
    NonConvergence(String),
    /// A precondition on operation inputs was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// No admissible candidate satisfies the requested constraint.
    #[error("constraint infeasible: {0}")]
    ConstraintInfeasible(String),
}

pub type Result<T> = std::result::Result<T, WulffError>;
