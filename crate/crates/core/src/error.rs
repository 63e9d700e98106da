use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside the admissible region of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The white-noise potential has covariance δ₀ and no pointwise value.
    #[error("no pointwise covariance: the covariance of {0} is the Dirac function")]
    NoPointwiseCovariance(&'static str),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("grid of {n}^{d} nodes does not fit the address space")]
    GridTooLarge { n: usize, d: usize },

    #[error(
        "circulant embedding is not nonnegative: most negative eigenvalue {min_eigenvalue:e} \
         (relative {relative:e}) at padding factor {padding}"
    )]
    EmbeddingNotPsd {
        min_eigenvalue: f64,
        relative: f64,
        padding: usize,
    },

    #[error("samples do not share one model, grid and mollification radius")]
    Mismatch,

    #[error("insufficient replicates: need at least {needed}, got {got}")]
    InsufficientReplicates { needed: usize, got: usize },

    #[error("offset {offset:?} is out of range for a grid with {n} nodes per axis")]
    OffsetOutOfRange { offset: Vec<i64>, n: usize },

    #[error(
        "no convergence after {iterations} iterations: best estimate {estimate}, residual {residual:e}"
    )]
    NonConvergence {
        iterations: usize,
        estimate: f64,
        residual: f64,
    },

    #[error("quadrature did not converge: last two refinements {previous} and {last}")]
    QuadratureNonConvergence { previous: f64, last: f64 },

    /// The path left the box before the time horizon.
    #[error("exit before horizon at step {step} (time {tau})")]
    ExitBeforeHorizon { step: usize, tau: f64 },

    #[error("every path exited the box before the horizon")]
    AllPathsExited,

    #[error("effective sample size {ess:.1} is below the minimum {min}")]
    LowEffectiveSampleSize { ess: f64, min: f64 },

    #[error("exponential average overflows (max exponent {max_exponent:.1}); use smaller theta or t")]
    VarianceOverflow { max_exponent: f64 },

    #[error("requested {requested} bytes, above the memory budget of {budget} bytes")]
    MemoryBudget { requested: usize, budget: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A sub-box eigenvalue exceeded the eigenvalue of the enclosing box.
    #[error("domain monotonicity violated: sub-box eigenvalue {sub} above full-box eigenvalue {full}")]
    MonotonicityViolation { sub: f64, full: f64 },

    #[error("invalid field dump: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
