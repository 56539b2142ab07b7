use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoreError {
    #[error("invalid bit string: unexpected {found:?} at position {position}")]
    BadBitString { position: usize, found: char },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("sample has {got} slots, expected {expected}")]
    WrongSampleLength { expected: usize, got: usize },

    #[error("state already decided")]
    AlreadyDecided,

    #[error("label width {0} outside 1..=64")]
    BadLabelWidth(u32),

    #[error("block id {id} does not fit an injective {width}-bit label")]
    LabelSpaceExhausted { id: u32, width: u32 },

    #[error("operation requires an {expected} epoch, current epoch is {epoch}")]
    WrongEpochParity { expected: &'static str, epoch: u64 },

    #[error("epoch {0} has not been initialised")]
    NotReady(u64),

    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),
}
