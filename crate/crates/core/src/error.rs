use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("argument {re}+{im}i lies outside the admissible strip")]
    OutsideStrip { re: f64, im: f64 },

    #[error("radicand {min:e} below guard {guard:e}: too close to the singular locus")]
    SingularLocus { min: f64, guard: f64 },

    #[error("state outside the domain: {0}")]
    Domain(String),

    #[error("step size underflow at t={t:e} (h={h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("step budget of {steps} exhausted at t={t:e}")]
    StepBudget { steps: usize, t: f64 },

    #[error("contraction lost at step {step}: measured factor {factor}")]
    ContractionLoss { step: usize, factor: f64 },

    #[error("incompatible series shapes: {0}")]
    Shape(String),
}

impl Error {
    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument { name, reason: reason.into() }
    }

    /// True for failures caused by numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::InvalidArgument { .. } | Error::Shape(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
