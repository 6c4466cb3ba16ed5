use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("loss domain error: {0}")]
    Domain(String),

    #[error("prediction {0} is outside [0, 1]")]
    InvalidPrediction(f64),

    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),

    #[error("invalid source: {0}")]
    InvalidSource(String),

    #[error("source is not ergodic: {0}")]
    NotErgodic(String),

    #[error("cannot condition on zero-probability history {0:?}")]
    ZeroProbabilityHistory(String),

    #[error("n = {n} exceeds the exact enumeration cap {cap}; use monte_carlo_conditional_entropy")]
    TooLargeForExact { n: usize, cap: usize },

    #[error("no minimizer: expected loss is infinite for every prediction")]
    NoMinimizer,

    #[error("configuration error: game is not mixable at eta = {0}")]
    NotMixable(f64),

    #[error("degenerate pool: every expert incurs infinite loss on outcome {0}")]
    DegeneratePool(u8),

    #[error("incomplete superloss trace: {0}")]
    IncompleteTrace(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors raised because a result's hypotheses do not hold
    /// (non-ergodic source, non-mixable learning rate).
    pub fn is_precondition(&self) -> bool {
        matches!(self, Error::NotErgodic(_) | Error::NotMixable(_))
    }
}
