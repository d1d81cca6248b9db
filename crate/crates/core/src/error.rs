use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("mode count must be at least 1, got {0}")]
    InvalidModeCount(usize),

    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),

    #[error("control grid covers [0, {covered}] but t = {requested} was requested")]
    ControlTooShort { covered: f64, requested: f64 },

    #[error("operands live on different spectral bases")]
    BasisMismatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("boundary node mismatch: {0}")]
    NodeMismatch(String),

    #[error("boundary extension residual {residual:e} exceeds tolerance {tolerance:e}")]
    ExtensionResidual { residual: f64, tolerance: f64 },

    #[error("invalid boundary region: {0}")]
    InvalidRegion(String),

    #[error("invalid sensor: {0}")]
    InvalidSensor(String),

    #[error("at least one sensor is required")]
    EmptySensors,

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    #[error("mode {index} {mode:?} is invisible to every sensor; it cannot be shifted")]
    UnobservableMode { index: usize, mode: Vec<usize> },

    #[error("gain design failed: {0}")]
    GainDesign(String),

    #[error("normal equations are numerically singular (condition estimate {condition:e}); use a positive regularization or fewer modes")]
    SingularNormalEquations { condition: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("nothing to fit: {0}")]
    NothingToFit(String),

    #[error("regions are not nested: {0}")]
    NotNested(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
