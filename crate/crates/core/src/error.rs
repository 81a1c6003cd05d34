use alloc::string::String;

/// Errors raised by the solver core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Dimensions or indices that do not agree with the model.
    #[error("model error: {0}")]
    Model(String),
    /// Invalid algorithm parameters.
    #[error("configuration error: {0}")]
    Config(String),
    /// A stage subproblem had no feasible solution for some incoming state.
    #[error("recourse violation at stage {stage}, realization {realization}")]
    RecourseViolation { stage: usize, realization: usize },
    /// The LP/MIP engine could not produce a trustworthy answer.
    #[error("solver failure: {0}")]
    SolverFailure(String),
    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),
    /// The request is outside what the implementation supports.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = core::result::Result<T, Error>;
