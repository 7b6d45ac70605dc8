use thiserror::Error;

/// Errors raised by the quantization pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("symbol `{symbol}` returned a non-finite value at (x, xi) = ({x}, {xi})")]
    NonFiniteEvaluation { symbol: String, x: f64, xi: f64 },

    #[error("derivative order ({i}, {j}) exceeds the supported total order 2")]
    UnsupportedOrder { i: usize, j: usize },

    #[error("symbol level {0} is not one of 0, 1, 2")]
    UnsupportedLevel(usize),

    #[error("unknown symbol name `{0}`")]
    UnknownSymbolName(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("energy {energy} lies outside the window [{min}, {max}]")]
    EnergyOutsideWindow { energy: f64, min: f64, max: f64 },

    #[error("ray from the well seed never reaches energy {0}")]
    NoCrossing(f64),

    #[error("no return to the section within t_max = {t_max}")]
    NoReturn { t_max: f64 },

    #[error("energy drift {drift:e} exceeds tolerance {tol:e}")]
    EnergyDrift { drift: f64, tol: f64 },

    #[error("orbit fails to close: distance {distance:e} exceeds {tol:e}")]
    OrbitNotClosed { distance: f64, tol: f64 },

    #[error("integrator step size underflow at t = {0}")]
    StepSizeUnderflow(f64),

    #[error("root bracket [{a}, {b}] does not contain a sign change")]
    InvalidBracket { a: f64, b: f64 },

    #[error("root search did not converge in {0} iterations")]
    RootNotConverged(usize),

    #[error("action S_h is not strictly increasing near E = {0}")]
    NonMonotoneAction(f64),

    #[error("momentum grid under-resolved: coverage {coverage} < required {required}")]
    GridUnderresolved { coverage: f64, required: f64 },

    #[error("grid size {0} exceeds the hard cap")]
    GridTooLarge(usize),

    #[error("grid size {0} must be an even power of two")]
    InvalidGrid(usize),

    #[error("anti-Hermitian part {discard:e} exceeds tolerance relative to norm {norm:e}")]
    HermitizationTooLarge { discard: f64, norm: f64 },

    #[error("eigensolver failed to converge")]
    EigensolverFailure,

    #[error("expected exactly two focal points on the orbit, found {0}")]
    FocalPointCount(usize),

    #[error("degenerate focal point: |d_x p0| = {0:e}")]
    DegenerateFocal(f64),

    #[error("failed to solve p0(x, xi) = E on the WKB branch at x = {0}")]
    BranchRootFailure(f64),

    #[error("WKB node too close to a focal point (margin {0})")]
    FocalTooClose(f64),

    #[error("branches were built at different (E, h) or x = {0} is outside their common grid")]
    GridMismatch(f64),

    #[error("critical point is degenerate (phi'' = {0:e})")]
    DegenerateCriticalPoint(f64),

    #[error("oscillatory quadrature under-resolved: {nodes} nodes, {required} required")]
    UnderresolvedOscillation { nodes: usize, required: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
