use thiserror::Error;

use crate::boxes::Side;

pub type Result<T, E = QpcError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpcError {
    #[error("bit string length {0} is outside the supported range 1..=64")]
    LengthOutOfRange(usize),

    #[error("bit strings have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("bit string must not be empty")]
    EmptyBitString,

    #[error("invalid bit character {0:?}, expected '0' or '1'")]
    InvalidBit(char),

    #[error("correlator {0} is outside [-1, 1]")]
    CorrelatorOutOfRange(f64),

    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("box input {0} is not in 0..=3")]
    InvalidBoxInput(u8),

    #[error("side {side} of box pair {pair} was already queried")]
    DoubleQuery { pair: usize, side: Side },

    #[error("box pair {0} was already used")]
    PairAlreadyUsed(usize),

    #[error("unknown box pair {0}")]
    UnknownPair(usize),

    #[error("box supply exhausted after {used} pairs")]
    SupplyExhausted { used: usize },

    #[error("correlator cell (k_A={k_a}, k_B={k_b}) has no records")]
    EmptyCell { k_a: u8, k_b: u8 },

    #[error("abort round {0} is not a positive even number")]
    InvalidAbortRound(u64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
