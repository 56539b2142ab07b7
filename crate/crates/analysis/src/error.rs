use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(String),

    #[error("threshold {m} outside [0, {k}]")]
    ThresholdOutOfRange { m: u64, k: u64 },

    #[error("population must contain at least one trial")]
    EmptyPopulation,

    #[error("fraction {0} outside [0, 1]")]
    FractionOutOfRange(String),

    #[error("cannot parse {0:?} as an exact rational")]
    Parse(String),

    #[error("target error {0} must be positive")]
    NonPositiveTarget(String),

    #[error("tail probability is 1 for alpha2={alpha2}: no beta satisfies p^beta < epsilon")]
    NeverTerminates { alpha2: u64 },

    #[error("beta would exceed {limit}")]
    BetaTooLarge { limit: u32 },

    #[error("{0} must be positive")]
    NonPositive(&'static str),
}
