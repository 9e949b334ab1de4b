use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid dipole element: {0}")]
    InvalidElement(String),

    #[error("non-finite integrand at z = {at:e} m ({context})")]
    NonFiniteIntegrand { at: f64, context: &'static str },

    #[error("quadrature did not reach tolerance (estimate error {error:e} after {intervals} intervals)")]
    QuadratureNotConverged { error: f64, intervals: usize },

    #[error("dipole wires overlap (axis separation {separation:e} m, radii sum {radii:e} m)")]
    OverlappingElements { separation: f64, radii: f64 },

    #[error("dipole axes are not parallel")]
    NonParallelElements,

    #[error("endpoint lies on the surface plane (angle {angle_deg} deg)")]
    EndpointOnSurface { angle_deg: f64 },

    #[error("passivity regularization shift {shift:e} ohm exceeds 1% of the smallest diagonal resistance {min_resistance:e} ohm")]
    PassivityShiftTooLarge { shift: f64, min_resistance: f64 },

    #[error("Re(Z) is not positive semidefinite (min eigenvalue {min_eigenvalue:e}, tolerance {tolerance:e})")]
    NotPassive { min_eigenvalue: f64, tolerance: f64 },

    #[error("impedance matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("port roles invalid: {0}")]
    InvalidRoles(String),

    #[error("port {0} is not a surface port")]
    NotSurfacePort(usize),

    #[error("singular shorted block (condition estimate {condition:e})")]
    SingularShortBlock { condition: f64 },

    #[error("singular matrix: {0}")]
    Singular(&'static str),

    #[error("port reflects perfectly: I - S is singular")]
    PerfectReflection,

    #[error("non-physical receiver: Re z_r = {0:e} ohm")]
    NonPhysicalReceiver(f64),

    #[error("affine constraints are rank deficient; dependent rows {0:?}")]
    RankDeficient(Vec<usize>),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("odd-length real vector ({0}) cannot be unlifted")]
    OddLength(usize),

    #[error("invalid surface configuration: {0}")]
    InvalidConfig(String),

    #[error("selection fraction {0} outside (0, 1]")]
    InvalidFraction(f64),

    #[error("transmitted power i^H Re(Z) i = {0:e} is not positive")]
    NonPositivePower(f64),

    #[error("power transfer efficiency {0} is not a non-negative finite number")]
    InvalidEfficiency(f64),

    #[error("invalid link budget: {0}")]
    InvalidBudget(String),

    #[error("vector has zero norm")]
    ZeroNorm,

    #[error("solver did not reach an optimal point: {0}")]
    SolverFailed(String),
}
