use std::path::PathBuf;

pub type Result<T, E = SrisError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum SrisError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] sris_core::Error),

    #[error("{0}")]
    Numerical(String),
}

impl SrisError {
    /// Process exit code: 1 usage, 2 input parse, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            SrisError::Usage(_) => 1,
            SrisError::Parse { .. } | SrisError::Json { .. } | SrisError::Io { .. } => 2,
            SrisError::Core(e) if is_input_error(e) => 2,
            SrisError::Core(_) | SrisError::Numerical(_) => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SrisError::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        SrisError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

/// Core errors caused by the supplied data rather than by the numerics.
fn is_input_error(e: &sris_core::Error) -> bool {
    use sris_core::Error as E;
    matches!(
        e,
        E::InvalidGeometry(_)
            | E::InvalidElement(_)
            | E::InvalidRoles(_)
            | E::InvalidConfig(_)
            | E::InvalidFraction(_)
            | E::NotSquare { .. }
            | E::NotSymmetric { .. }
            | E::NotPassive { .. }
            | E::DimensionMismatch { .. }
    )
}
