use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Indices reported here are 1-based.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("vector must have at least one entry")]
    Empty,
    #[error("entry {index} is {value}; entries must be finite and nonnegative")]
    InvalidEntry { index: usize, value: f64 },
    #[error("window length k={k} is invalid for n={n} (need 1 <= k <= n)")]
    InvalidWindow { k: usize, n: usize },
    #[error("window sum t({start},{k}) is zero (term {term} of the cyclic sum)")]
    ZeroWindow { start: usize, k: usize, term: usize },
    #[error("length n={n} is not divisible by k={k}")]
    Shape { n: usize, k: usize },
    #[error("entry {index} is zero; a strictly positive vector is required")]
    NonPositiveEntry { index: usize },
    #[error("family index {0} is degenerate (need k > 1 or infinity)")]
    DegenerateFamily(f64),
    #[error("no sign change of the tangency equation on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("{count} sign changes of the tangency equation on [{lo}, {hi}]; expected exactly one")]
    MultipleRoots { count: usize, lo: f64, hi: f64 },
    #[error("residual {residual:e} exceeds tolerance {tol:e}")]
    Tolerance { residual: f64, tol: f64 },
    #[error("required size n={needed} exceeds the cap {cap}")]
    Capacity { needed: u64, cap: u64 },
    #[error("invalid witness spec: {0}")]
    InvalidSpec(String),
    #[error("entries span e^{span:.1}, which does not fit the floating-point range")]
    Range { span: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
}
