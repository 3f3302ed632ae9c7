use thiserror::Error;

/// Crate-wide error type.
///
/// Numerical routines fail loudly rather than returning poisoned values:
/// singular systems, nonpositive determinants, invalid kernels and exhausted
/// search budgets all surface as distinct variants.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("matrix dimensions do not match: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("kernel entries must be finite (offending entry at row {row}, col {col})")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("index set must be strictly increasing and nonempty")]
    InvalidIndexSet,

    #[error("labels must be strictly increasing and match the kernel dimension")]
    InvalidLabels,

    #[error("diagonal scaling entries must be strictly positive and finite")]
    InvalidScaling,

    #[error("matrix is singular to working precision")]
    SingularMatrix,

    #[error("matrix is ill-conditioned (estimated condition {cond:.3e} exceeds 1e12)")]
    IllConditioned { cond: f64 },

    #[error("solve residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    ResidualTooLarge { residual: f64, tol: f64 },

    #[error("determinant of I + K diag(s) is nonpositive ({det:.6e}); transform undefined")]
    NonpositiveDeterminant { det: f64 },

    #[error("scaling vector entries must be nonnegative and finite")]
    InvalidScalingVector,

    #[error("kernel entries must be strictly positive for this check")]
    NonpositiveEntry { row: usize, col: usize },

    #[error(
        "matrix is not symmetric within tolerance (deviation {deviation:.3e} at ({row},{col}))"
    )]
    NotSymmetric {
        row: usize,
        col: usize,
        deviation: f64,
    },

    #[error(
        "cycle condition fails at ({i1},{i2},{i3}): forward {forward:.6e}, reverse {reverse:.6e}"
    )]
    CycleViolation {
        i1: usize,
        i2: usize,
        i3: usize,
        forward: f64,
        reverse: f64,
    },

    #[error("points must be strictly increasing")]
    PointsNotIncreasing,

    #[error("points must be strictly positive")]
    PointsNotPositive,

    #[error("decay rate must be strictly positive and finite")]
    InvalidDecayRate,

    #[error("diagonal-plus-constant parameters invalid: {reason}")]
    InvalidDiagPlusConstant { reason: String },

    #[error("generator is not a valid potential generator: {reason}")]
    InvalidGenerator { reason: String },

    #[error("random potential generation failed after {attempts} attempts")]
    PotentialRetriesExhausted { attempts: usize },

    #[error("potential validation failed: {reason}")]
    InvalidPotential { reason: String },

    #[error("perturbation vector must be strictly positive and finite")]
    InvalidPerturbation,

    #[error("vector entries must be strictly positive and finite")]
    NonpositiveVector,

    #[error("triple indices must be distinct")]
    RepeatedTripleIndex,

    #[error("block is {got}x{got}, expected 3x3")]
    NotTripleBlock { got: usize },

    #[error("block violates min-diagonal domination by {deviation:.3e} at ({row},{col})")]
    DominationViolation {
        row: usize,
        col: usize,
        deviation: f64,
    },

    #[error("residual vanishes identically on diagonal-plus-constant blocks; no perturbation can expose it")]
    ResidualVanishesIdentically,

    #[error("perturbation search exhausted within radius {radius:.3e} (floor {floor:.3e})")]
    SearchExhausted { radius: f64, floor: f64 },

    #[error("shrink budget exhausted at block {block}: cannot satisfy bound and interference constraints at floor {floor:.3e}")]
    BudgetExhausted { block: usize, floor: f64 },

    #[error("kernel family evaluation failed at ({i},{j}): {reason}")]
    EvalFailure { i: usize, j: usize, reason: String },

    #[error("monotone function expression invalid: {reason}")]
    MonotoneParse { reason: String },

    #[error("family descriptor invalid: {reason}")]
    InvalidFamily { reason: String },

    #[error("kernel is not symmetric positive semi-definite: {reason}")]
    NotPsd { reason: String },

    #[error("alpha = {m}/{n} is not samplable: 2*alpha must be a positive integer")]
    UnsupportedAlpha { m: u32, n: u32 },

    #[error("eigenvalue clipping discarded {clipped:.3e}, beyond tolerance {tol:.3e}")]
    ClippingTooLarge { clipped: f64, tol: f64 },

    #[error(
        "limit-point hypothesis fails: u(y, x0) = {value:.6e} >= u(x0, x0) = {diag:.6e} at y = {y}"
    )]
    LimitPointHypothesis { y: f64, value: f64, diag: f64 },

    #[error("diagonal continuity surrogate fails: |u(x_j,x_j) - u(x0,x0)| = {deviation:.3e} at the sequence tail")]
    ContinuityViolation { deviation: f64 },

    #[error("not enough points: need at least {needed}, got {got}")]
    NotEnoughPoints { needed: usize, got: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
