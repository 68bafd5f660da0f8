use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("weight matrix is not Hermitian at node {node} (defect {defect:.3e})")]
    NonHermitianWeight { node: usize, defect: f64 },

    #[error("mollifier width must be positive, got {0}")]
    InvalidEpsilon(f64),

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("leading coefficient not positive definite at t = {t}, x = {x:?}")]
    NotPositiveDefinite { t: f64, x: Vec<f64> },

    #[error("principal part is not symmetric (defect {0:.3e})")]
    NonSymmetricPrincipal(f64),

    #[error("invalid controls: {0}")]
    InvalidControls(String),

    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepFailure { t: f64, h: f64 },

    #[error("hypotheses not met: {0}")]
    HypothesisViolated(String),

    #[error("composer is required for the third Moser estimate")]
    MissingComposer,

    #[error("composer must vanish at zero (F(0) = {0})")]
    ComposerNotPunctured(f64),

    #[error("invalid Clifford representation: {0}")]
    InvalidClifford(String),

    #[error("point {0:?} lies outside the test box")]
    OutsideBox(Vec<f64>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid causal plan: {0}")]
    InvalidPlan(String),

    #[error("propagator is not monotone: P({lo}) = {p_lo} > P({hi}) = {p_hi}")]
    NonMonotonePropagator { lo: f64, hi: f64, p_lo: f64, p_hi: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
