use thiserror::Error;

/// Errors raised by the numerical operations of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("lattice of {points} points exceeds the cap of {cap}")]
    CapExceeded { points: usize, cap: usize },

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("wave function must be in the {expected} representation")]
    WrongRepresentation { expected: &'static str },

    #[error("axis {axis} out of range for a {dims}-dimensional grid")]
    AxisOutOfRange { axis: usize, dims: usize },

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("symbol is not real and finite at lattice point {index}: {value}")]
    NonRealSymbol { index: usize, value: f64 },

    #[error("invalid particle system: {0}")]
    InvalidSystem(String),

    #[error("matrix is not Hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("Hamiltonian is not in kinetic-plus-potential form")]
    NotSplittable,

    #[error("invalid propagator configuration: {0}")]
    InvalidConfig(String),

    #[error("stability bound violated: dt = {dt} exceeds {bound}")]
    Unstable { dt: f64, bound: f64 },

    #[error("boundary monitor tripped at t = {time}: mass {mass:e} in the outer shell exceeds {threshold:e}")]
    MonitorTrip { time: f64, mass: f64, threshold: f64 },

    #[error("need at least {needed} snapshots, got {got}")]
    TooFewSnapshots { needed: usize, got: usize },

    #[error("packet too wide for the domain: {0}")]
    PacketTooWide(String),

    #[error("invalid interval ({a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },

    #[error("quadrature step {step} too coarse; must be at most {limit}")]
    StepTooCoarse { step: f64, limit: f64 },

    #[error("potential has no decay-to-zero tail; bound/continuum classification is undefined")]
    NoDecayingTail,

    #[error("invalid superposition: {0}")]
    InvalidSuperposition(String),

    #[error("time grid cannot resolve the spectrum: {0}")]
    Unresolved(String),

    #[error("shift {z} is (numerically) an eigenvalue")]
    SingularShift { z: num_complex::Complex64 },

    #[error("iterative solver stalled at relative residual {residual:e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("broadening must be positive, got {0}")]
    NonPositiveBroadening(f64),

    #[error("shift must leave the real axis (Im z = 0)")]
    RealShift,

    #[error("truncation at T = {t_max} leaves a tail factor {tail:e}, above {limit:e}")]
    TruncationTooShort { t_max: f64, tail: f64, limit: f64 },

    #[error("branch mismatch: {0}")]
    BranchMismatch(String),

    #[error("time must be nonzero and finite, got {0}")]
    InvalidTime(f64),

    #[error("radius {radius} out of range (0, {limit})")]
    RadiusOutOfRange { radius: f64, limit: f64 },

    #[error("mean momentum vanishes or changes sign at t = {time}")]
    MomentumCrossesZero { time: f64 },

    #[error("initial state has only {weight:.6} of its weight in the continuum proxy (need {threshold})")]
    BoundInitialState { weight: f64, threshold: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("{0}")]
    Fit(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
