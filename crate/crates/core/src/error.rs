use thiserror::Error;

/// Errors raised by the flow laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("corrupt field: non-finite perturbation value at grid point ({i}, {j})")]
    CorruptField { i: usize, j: usize },

    #[error("unsupported order {0}: derivatives are available up to order 4")]
    UnsupportedOrder(usize),

    #[error("geometry inconsistency: tr(s) by contraction is {contraction}, by singular values {formula}")]
    GeometryInconsistency { contraction: f64, formula: f64 },

    #[error("blow-up detected at step {step} (t = {t})")]
    BlowUp { step: u64, t: f64 },

    #[error("outside area-decreasing regime: tr(s) = {0} is not positive")]
    OutsideAreaDecreasing(f64),

    #[error("invariant violated at t = {t}: {what}")]
    InvariantViolation { t: f64, what: String },

    #[error("insufficient horizon: {0}")]
    InsufficientHorizon(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed {what}: {detail}")]
    Malformed { what: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
