use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    Parameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible stick constraint at index {index}: z = {value} with exhausted stick")]
    Infeasible { index: usize, value: f64 },

    #[error("step size {step} failed to increase the objective at iteration {iteration}")]
    StepSize { step: f64, iteration: usize },

    #[error("base distribution {0} has no exact moment for this test function")]
    UnsupportedBase(String),

    #[error("problem size {got} exceeds the supported maximum {max}")]
    Size { got: usize, max: usize },

    #[error("quadrature did not converge: estimated error {achieved:e} above requested {requested:e}")]
    Accuracy { achieved: f64, requested: f64 },
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter {
            name,
            value,
            reason: "must be finite and positive",
        })
    }
}
