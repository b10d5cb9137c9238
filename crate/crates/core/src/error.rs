use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure classes. The CLI maps each one to a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numerical => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("band mismatch: frequency {0} is not present in the supplied spectra")]
    BandMismatch(usize),

    #[error("singular cross-spectrum ({what}): reciprocal condition estimate {rcond:e}")]
    SingularCrossSpectrum { what: &'static str, rcond: f64 },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("degenerate residual covariance: {0}")]
    DegenerateResidual(String),

    #[error("perfect lagged fit: unconstrained residual covariance is singular")]
    PerfectLaggedFit,

    #[error("invalid coherence: {0}")]
    InvalidCoherence(String),

    #[error("ragged data: {0}")]
    RaggedData(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::InvalidData(_)
            | Error::ShapeMismatch(_)
            | Error::BandMismatch(_)
            | Error::RaggedData(_)
            | Error::Format(_)
            | Error::Io { .. } => ErrorClass::Data,
            Error::SingularCrossSpectrum { .. }
            | Error::InvalidMatrix(_)
            | Error::DegenerateResidual(_)
            | Error::PerfectLaggedFit
            | Error::InvalidCoherence(_)
            | Error::Internal(_) => ErrorClass::Numerical,
            Error::Context { source, .. } => source.class(),
        }
    }

    pub fn with_context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with all context layers stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
