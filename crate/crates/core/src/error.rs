use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum KdvError {
    #[error("grid spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),

    #[error("a grid function needs at least one value")]
    EmptyGrid,

    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("grid functions live on different grids")]
    GridMismatch,

    #[error("ramp half-width must exceed 1, got {0}")]
    InvalidRamp(f64),

    #[error("operator dimension {0} is below the minimum of 4")]
    DimensionTooSmall(usize),

    #[error("time step must be finite and non-negative, got {0}")]
    InvalidTimeStep(f64),

    #[error("numerically singular pivot at row {row}")]
    SingularPivot { row: usize },

    #[error("{name} = {value} must lie strictly between 0 and 1")]
    InvalidCflParameter { name: &'static str, value: f64 },

    #[error("invalid configuration field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("solution became non-finite at step {step}")]
    NonFiniteStep { step: usize },

    #[error("point (x = {x}, t = {t}) lies outside the stored trajectory")]
    OutOfRange { x: f64, t: f64 },

    #[error("relative error denominator is zero")]
    ZeroDenominator,

    #[error("two-soliton parameters need 0 < a < b, got a = {a}, b = {b}")]
    InvalidSolitonParams { a: f64, b: f64 },

    #[error("budget window |x| <= {0} is not contained in the grid")]
    WindowTooSmall(f64),

    #[error("resolution list must be non-empty and strictly increasing")]
    UnorderedResolutions,

    #[error("trajectory does not resolve every time step (record_every = {0})")]
    MissingSnapshots(usize),
}

pub type Result<T> = std::result::Result<T, KdvError>;
