use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Mandel Q is undefined for a source with zero mean.
    #[error("Mandel Q is undefined for zero mean")]
    UndefinedQ,

    #[error("insufficient samples: need at least {needed}, have {have}")]
    InsufficientSamples { needed: u64, have: u64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("integer overflow in {0}")]
    Overflow(&'static str),

    #[error("not estimable: {0}")]
    NotEstimable(String),

    #[error("not fittable: {0}")]
    NotFittable(String),

    #[error("not recoverable: {0}")]
    NotRecoverable(String),

    #[error("{path}:{line}: {message}")]
    Config {
        path: String,
        line: usize,
        message: String,
    },

    #[error("parse error in {what}: {message}")]
    Parse { what: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end:
    /// 2 usage/config, 3 I/O, 4 numeric/overflow.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            Error::Overflow(_)
            | Error::NotEstimable(_)
            | Error::NotFittable(_)
            | Error::NotRecoverable(_)
            | Error::UndefinedQ => 4,
            Error::InvalidArgument(_)
            | Error::InsufficientSamples { .. }
            | Error::ShapeMismatch(_)
            | Error::Config { .. }
            | Error::Parse { .. } => 2,
        }
    }
}
