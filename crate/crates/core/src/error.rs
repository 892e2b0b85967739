use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller passed something the operation's contract forbids.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("dimension mismatch: expected ({expected_n}, {expected_m}), got ({got_n}, {got_m})")]
    DimensionMismatch {
        expected_n: usize,
        expected_m: usize,
        got_n: usize,
        got_m: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// The scalar prox minimizer sits on the edge of the search interval,
    /// so the true minimizer may lie outside it.
    #[error("box too small: minimizer {at} on boundary of [{lo}, {hi}]")]
    BoxTooSmall { lo: f64, hi: f64, at: f64 },

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The exponent calculus rule was invoked outside its hypothesis.
    #[error("out of hypothesis: {0}")]
    OutOfHypothesis(String),

    #[error("malformed trace at line {line}: {message}")]
    MalformedTrace { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}
