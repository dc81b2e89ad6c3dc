//! Error types shared by the EM engine and the bundled estimators.

use thiserror::Error;

/// Errors produced by the EM engine and by model-specific steps.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmError {
    /// A parameter point or configuration violates the model's constraint set
    /// (e.g. leaves the probability simplex).
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),

    /// The observed data has probability zero under the current parameters.
    #[error("impossible data: {0}")]
    ImpossibleData(String),

    /// A sib genotype cannot be produced by the stated parental genotypes.
    #[error("mendelian violation: {0}")]
    MendelianViolation(String),

    /// The input is structurally valid but cannot support estimation.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// The log-likelihood became non-finite at the given iteration.
    #[error("numerical failure at iteration {iteration}: log-likelihood is {value}")]
    NumericalFailure { iteration: usize, value: f64 },

    /// The log-likelihood decreased beyond the configured slack. EM guarantees
    /// a non-decreasing likelihood, so this indicates a bug in a model step.
    #[error("log-likelihood decreased by {decrease:e} at iteration {iteration}")]
    MonotonicityViolation { iteration: usize, decrease: f64 },
}
