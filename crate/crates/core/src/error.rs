use thiserror::Error;

/// Errors raised by the column solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("position x = {x} lies outside the column [0, {length}]")]
    PositionOutOfRange { x: f64, length: f64 },

    #[error("time t = {t} precedes the initial time t0 = {t0}")]
    TimeBeforeStart { t: f64, t0: f64 },

    #[error("time t = {t} lies beyond the resolved exit horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },

    #[error("heat kernel requires t > 0, got {0}")]
    NonPositiveTime(f64),

    #[error("quadrature on [{a}, {b}] did not converge: estimated error {error:e} after {subdivisions} subdivisions")]
    Quadrature {
        a: f64,
        b: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("no sign change of the root function on [{a}, {b}]")]
    RootNotBracketed { a: f64, b: f64 },

    #[error("root refinement on [{a}, {b}] stalled after {iterations} iterations")]
    RootNotConverged { a: f64, b: f64, iterations: usize },

    #[error("flux transform undefined: mu = 0 with gamma = {gamma} > 0; supply a small positive mu explicitly")]
    FluxTransformUndefined { gamma: f64 },

    #[error("exit concentration has not been resolved; build the exit-flux memo first")]
    ExitUnresolved,

    #[error("exponential overflow evaluating {what} (exponent {exponent})")]
    Overflow { what: &'static str, exponent: f64 },

    #[error("large-time horizon undefined: {0}")]
    HorizonUndefined(String),

    #[error("tridiagonal solve failed at row {row}: pivot {pivot:e}")]
    LinearSolve { row: usize, pivot: f64 },

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),
}

pub type Result<T> = std::result::Result<T, Error>;
