use thiserror::Error;

/// Errors raised anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter failed validation; `field` names the offending setting.
    #[error("{field}: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("could not sample a configuration with all pair separations >= {min_separation} after {attempts} attempts")]
    RejectionLimit { min_separation: f64, attempts: usize },

    #[error("pair separation {separation:e} is below the minimum {min_separation:e}")]
    SeparationTooSmall { separation: f64, min_separation: f64 },

    #[error("quadrature did not converge: relative refinement difference {difference:e} > {tolerance:e}")]
    QuadratureNotConverged { difference: f64, tolerance: f64 },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("{atoms} atoms exceed the limit of {limit} for {what}")]
    DimensionOverflow { atoms: usize, limit: usize, what: &'static str },

    #[error("steady-state solve failed (residual {residual:e}): {reason}")]
    SteadyState { residual: f64, reason: String },

    #[error("density matrix check failed: {0}")]
    InvalidState(String),

    #[error("time integration failed at t = {t}: step size {step:e} underflowed")]
    StepUnderflow { t: f64, step: f64 },

    #[error("no steady state reached by t = {t_max} (last residuals: {residuals:?})")]
    NotConverged { t_max: f64, residuals: Vec<f64> },

    #[error("population left [0, 1] during integration: {value}")]
    Unphysical { value: f64 },

    #[error("pair ({0}, {1}) is not a valid pair of distinct atoms")]
    InvalidPair(usize, usize),

    #[error("{failed} of {total} realizations failed at one grid point (budget {budget}); first failure: {first}")]
    FailureBudget { failed: usize, total: usize, budget: f64, first: String },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { field: field.into(), reason: reason.into() }
}
