use thiserror::Error;

/// Errors surfaced by the solver library.
///
/// The variants line up with the CLI exit-code contract: `Feasibility`
/// maps to 1, `Precondition`/`Infeasible` to 2 and `Capability` to 3.
#[derive(Debug, Error)]
pub enum FlmError {
    #[error("unknown identifier: {0}")]
    Identifier(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("unbounded: {0}")]
    Unbounded(String),
    #[error("capability exceeded: {0}")]
    Capability(String),
    #[error("solution not feasible: {0}")]
    Feasibility(String),
    #[error("internal invariant breached: {0}")]
    Invariant(String),
    #[error("unknown fixture: {0}")]
    UnknownFixture(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = FlmError> = std::result::Result<T, E>;
