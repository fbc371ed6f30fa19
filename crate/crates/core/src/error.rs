use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid feature: {0}")]
    InvalidFeature(String),
    #[error("PCA input has rank {rank}, fewer than the {requested} requested directions")]
    InsufficientRank { rank: usize, requested: usize },
    #[error("buffer for {0} is frozen")]
    FrozenBuffer(String),
    #[error("prototype for {0} is frozen")]
    FrozenPrototype(String),
    #[error("discoverable-class cap of {0} reached")]
    CapExhausted(u32),
    #[error("incompatible snapshot: {0}")]
    IncompatibleSnapshot(String),
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
}

impl Error {
    pub(crate) fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn invalid_feature(msg: impl Into<String>) -> Self {
        Error::InvalidFeature(msg.into())
    }
}
