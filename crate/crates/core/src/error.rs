use thiserror::Error;

/// Every failure surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("not a system point: {0}")]
    NotSystemPoint(String),
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
    #[error("precision exhausted at {bits} bits while deciding {what}")]
    PrecisionExhausted { bits: u32, what: String },
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("distribution failure: {0}")]
    DistributionFailure(String),
    #[error("count failure at level {level}, parent annulus {parent}: {found} children, need {required}")]
    CountFailure {
        level: usize,
        parent: usize,
        found: usize,
        required: String,
    },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("degenerate region: {0}")]
    DegenerateRegion(String),
    #[error("ill-posed input: {0}")]
    IllPosed(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Resource exhaustion of any kind, as opposed to a failed check.
    pub fn is_resource_limit(&self) -> bool {
        matches!(self, Error::ResourceLimit(_) | Error::PrecisionExhausted { .. })
    }
}
