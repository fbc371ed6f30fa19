use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: not a TTDF file (bad magic)")]
    Format { path: PathBuf },
    #[error("{path}: corrupt file: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("data error: {0}")]
    Data(String),
    #[error("synthetic generation failed: {0}")]
    Generation(String),
    #[error(transparent)]
    Engine(#[from] ttd_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 config, 3 data, 4 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Format { .. }
            | Error::Corrupt { .. }
            | Error::Data(_)
            | Error::Generation(_)
            | Error::Io { .. } => 3,
            Error::Engine(ttd_core::Error::InvalidFeature(_)) => 3,
            Error::Engine(ttd_core::Error::IncompatibleSnapshot(_))
            | Error::Engine(ttd_core::Error::CorruptSnapshot(_)) => 3,
            Error::Engine(_) => 4,
        }
    }
}
