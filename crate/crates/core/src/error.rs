use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("region is unbounded (requires b > 0, γᵢ > 0 and |wᵢ| < γᵢ on every axis)")]
    Unbounded,
    #[error("dimension {dim} exceeds the enumeration limit of {max}")]
    DimensionTooLarge { dim: usize, max: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("class {0} has no samples")]
    MissingClass(usize),
    #[error("need both positive and negative samples")]
    SingleClass,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
