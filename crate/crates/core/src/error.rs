use thiserror::Error;

/// Errors produced while decoding images, planning, embedding or extracting.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// The input is not a well-formed 8-bit binary PGM file.
    #[error("pgm decode error at byte {offset}: {reason}")]
    Decode { offset: usize, reason: String },

    /// The image is too small (or the two images disagree in size).
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A caller-supplied argument is out of range.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The requested payload does not fit.
    #[error("capacity exceeded: requested {requested} bits, at most {achievable} achievable")]
    Capacity { requested: usize, achievable: usize },

    /// The auxiliary information does not fit in the reserved rows.
    #[error("auxiliary information of {bits} bits exceeds the limit of {limit} bits")]
    AuxOverflow { bits: usize, limit: usize },

    /// A field does not fit its pinned bit width.
    #[error("serialization error: {0}")]
    Serialization(String),

    /// The auxiliary bit stream is malformed.
    #[error("malformed auxiliary stream at bit {offset}: {reason}")]
    Deserialization { offset: usize, reason: String },

    /// The stego image is inconsistent with its auxiliary information.
    #[error("corrupted stego image: {0}")]
    Corruption(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
