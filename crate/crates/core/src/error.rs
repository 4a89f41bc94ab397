use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("state needs at least 2 strategies, got {0}")]
    TooFewStrategies(usize),
    #[error("entry {index} = {value} is below -{tol}")]
    NegativeEntry { index: usize, value: f64, tol: f64 },
    #[error("entries sum to {sum}, expected 1 within {tol}")]
    SumMismatch { sum: f64, tol: f64 },
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("arity mismatch: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("strategy index {index} out of range for {arity} strategies")]
    StrategyOutOfRange { index: usize, arity: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("exact enumeration refused for m = {m}, N = {n} (limit m <= 12, N <= 8); use the Monte-Carlo estimator")]
    EnumerationTooLarge { m: usize, n: usize },
    #[error("baseline K = {k} violates positivity at payoff {payoff} (strategy {strategy})")]
    BaselineViolated { k: f64, payoff: f64, strategy: usize },
    #[error("baseline K is unresolved; resolve the protocol against a game first")]
    UnresolvedBaseline,
    #[error("selection rule is not imitative")]
    NotImitative,
    #[error("step size underflow at t = {t}: h = {h} < h_min")]
    StepUnderflow { t: f64, h: f64, state: Vec<f64> },
    #[error("simplex drift {drift} exceeds tolerance at t = {t}")]
    SimplexDrift { t: f64, drift: f64, state: Vec<f64> },
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64, state: Vec<f64> },
    #[error("controller switched more than {0} times")]
    Chattering(usize),
    #[error("trajectory too short: {got} samples in tail window, need {needed}")]
    TooShort { got: usize, needed: usize },
    #[error("strategies {i} and {j} are not exact twins (payoffs differ by {gap} at a sampled state)")]
    NotTwins { i: usize, j: usize, gap: f64 },
    #[error("times must be strictly increasing: {prev} then {next}")]
    NonIncreasingTime { prev: f64, next: f64 },
    #[error("no root: {0}")]
    NoRoot(String),
}
