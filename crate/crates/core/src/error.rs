use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("quaternion norm is zero (squared norm {squared_norm:e} below {epsilon:e})")]
    ZeroNorm { squared_norm: f64, epsilon: f64 },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("split is empty")]
    EmptySplit,

    #[error("{0} is not finite")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),

    #[error("invalid dataset: {0}")]
    InvalidDataset(&'static str),
}

impl Error {
    /// Errors caused by degenerate floating point state rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::ZeroNorm { .. } | Error::NonFinite(_))
    }
}
