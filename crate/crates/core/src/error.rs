use thiserror::Error;

/// Errors raised by the simulation engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid state space: {0}")]
    InvalidStateSpace(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// `p` puts mass on a state where the reference measure is zero.
    #[error("absolutely irreversible pair: p({state}) > 0 but the reference probability is zero")]
    AbsolutelyIrreversible { state: usize },

    /// An entropy production was requested for an outcome the process never produces.
    #[error("zero-probability outcome: record {record}, controlled state {state}")]
    ZeroProbabilityOutcome { record: usize, state: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("phonon truncation too small: tail mass {tail:.3e} beyond n_max = {n_max}")]
    TruncationTail { n_max: usize, tail: f64 },

    #[error("sideband transfer undefined for phonon index 0")]
    NoSidebandPartner,

    #[error("divergent observable on a realizable outcome")]
    DivergentObservable,

    /// Efficacies need a strictly positive free-energy budget.
    #[error("efficacies undefined: free-energy difference is {0}")]
    UndefinedEfficacy(f64),

    #[error("empty trajectory batch")]
    EmptyBatch,
}

pub type Result<T> = std::result::Result<T, Error>;
