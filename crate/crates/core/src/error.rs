use alloc::string::String;

/// Failures surfaced by the evaluation toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{what} row {row} is not a probability distribution (sum = {sum})")]
    NotStochastic {
        what: &'static str,
        row: usize,
        sum: f64,
    },
    #[error("{what} row {row} has a negative or non-finite entry {value}")]
    InvalidProbability {
        what: &'static str,
        row: usize,
        value: f64,
    },
    #[error("discount factor {0} is outside (0, 1]")]
    InvalidDiscount(f64),
    #[error("chain is not ergodic: {0}")]
    NotErgodic(String),
    #[error("no mixing time within {cap} steps (reducible or periodic chain)")]
    MixingCapExceeded { cap: usize },
    #[error("singular linear system in {0}")]
    Singular(&'static str),
    #[error("feature map is not realizable: weighted Bellman residual {residual:e}")]
    NotRealizable { residual: f64 },
    #[error("average-reward feature is not orthogonal to phi(s{state}) (inner product {dot:e})")]
    ZetaNotOrthogonal { state: usize, dot: f64 },
    #[error("discounted problems require zeta = 0")]
    ZetaMustVanish,
    #[error("behavior policy never takes action {action} in state {state} but the target does")]
    UnsupportedAction { state: usize, action: usize },
    #[error("reward {reward} is not in the declared support of (s{state}, a{action})")]
    UnknownReward {
        state: usize,
        action: usize,
        reward: f64,
    },
    #[error("index {index} out of range for {what} (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("invalid step schedule: {0}")]
    InvalidSchedule(String),
    #[error("initial parameter is outside the projection set")]
    InfeasibleStart,
    #[error("rate fit needs at least 5 points in the window, found {0}")]
    TooFewPoints(usize),
    #[error("rate fit needs a strictly positive metric, found {value} at t = {t}")]
    NonPositiveMetric { t: f64, value: f64 },
    #[error("evaluation diverged in round {round}: loss gap {gap:e} exceeds 10x its start {start:e}")]
    Diverged { round: usize, gap: f64, start: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = core::result::Result<T, Error>;
