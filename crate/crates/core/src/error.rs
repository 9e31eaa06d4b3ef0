use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("operator is not Hermitian (max |M - M^dagger| = {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("degenerate spectrum: smallest relative eigenvalue gap {gap:e} below tolerance {tol:e}")]
    DegenerateSpectrum { gap: f64, tol: f64 },

    #[error("impulse time {at} lies outside [0, {duration}]")]
    ImpulseOutOfRange { at: f64, duration: f64 },

    #[error("path count {paths} exceeds cap {cap}; reduce the slice count or use the lambda route")]
    CapExceeded { paths: u128, cap: u64 },

    #[error("quadrature budget exceeded: order {order} x {points} points > {budget}")]
    QuadratureBudgetExceeded {
        order: usize,
        points: usize,
        budget: usize,
    },

    #[error("all substates are zero")]
    AllZeroSubstates,

    #[error(
        "Nyquist violation on axis {axis}: attainable readout span {span} does not fit the \
         f-period {period}; use at least {suggested_points} points at this spacing"
    )]
    NyquistViolation {
        axis: usize,
        span: f64,
        period: f64,
        suggested_points: usize,
    },

    #[error(
        "grid too small on axis {axis}: readouts [{f_min}, {f_max}] not inside grid \
         [{grid_min}, {grid_max}]"
    )]
    GridTooSmall {
        axis: usize,
        f_min: f64,
        f_max: f64,
        grid_min: f64,
        grid_max: f64,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("fine-grained fields are not normalizable; coarse grain with a square-integrable kernel first")]
    FineFieldNotNormalizable,

    #[error("rescaling factor must be positive, got {0}")]
    NonPositiveAlpha(f64),

    #[error("record set is empty")]
    EmptyRecordSet,

    #[error("impulse switching functions are not square integrable")]
    ImpulseNotSquareIntegrable,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
