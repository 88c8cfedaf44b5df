//! Error type shared by all library modules.

/// Errors reported by grid construction, engine configuration and the
/// concealment driver.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A buffer length does not match the grid it is paired with.
    #[error("dimension mismatch: expected {expected} samples, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Every extrapolation needs at least one observed sample.
    #[error("data area contains no support samples")]
    EmptySupport,

    /// A parameter is outside its documented range.
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A loss pattern violates the isolation precondition of the
    /// block-independent driver.
    #[error("loss blocks are not isolated: {0}")]
    NotIsolated(String),

    /// A per-block failure inside the concealment driver, tagged with the
    /// block it occurred in.
    #[error("block {id}: {source}")]
    Block {
        id: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
