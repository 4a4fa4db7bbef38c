use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("scenario constraint violated: {0}")]
    Constraint(String),

    #[error("cover arc of an empty point set is undefined")]
    EmptyPointSet,

    #[error("expected {expected} values, got {actual}")]
    WrongMultisetSize { expected: usize, actual: usize },

    #[error("unknown adversary strategy `{0}`")]
    UnknownStrategy(String),

    #[error("accuracy fixed point diverged after {iterations} iterations")]
    FixedPointDivergence { iterations: usize },

    #[error("no parameter solution with K1 <= {max_k1}; binding constraint: {binding}")]
    Unsolvable { max_k1: u32, binding: String },

    #[error("time {t} outside trace horizon [0, {horizon}]")]
    OutsideHorizon { t: u64, horizon: u64 },

    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),

    #[error("trial with seed {seed} panicked: {message}")]
    TrialPanic { seed: u64, message: String },

    #[error("trace error: {0}")]
    Trace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
