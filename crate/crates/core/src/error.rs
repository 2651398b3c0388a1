use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    #[error("action of player {player} at step {step} lies outside the action set")]
    ActionOutsideSet { player: usize, step: usize },

    #[error("fallback action is not an element of the action set")]
    FallbackOutsideSet,

    #[error("non-finite state for player {player} at step {step}")]
    NonFiniteState { player: usize, step: usize },

    #[error("non-finite value in dynamic programming at slot {slot}, node {node}, atom {atom}")]
    NonFiniteValue { slot: usize, node: usize, atom: usize },

    #[error("candidate strategy {0} is not narrow")]
    NotNarrow(usize),

    #[error("incompatible supports: {0}")]
    IncompatibleSupports(String),

    #[error("empty control grid")]
    EmptyGrid,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("oracle fixed point not reached after {sweeps} sweeps (last change {change:e})")]
    OracleNotConverged { sweeps: usize, change: f64 },

    #[error("fixed-point iteration {0} produced a non-finite flow")]
    Divergence(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
