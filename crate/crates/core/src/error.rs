use std::path::PathBuf;

/// Errors raised by the simulator, its data loaders and checkpoint code.
#[derive(Debug, thiserror::Error)]
pub enum SnnError {
    /// A caller broke an operation's precondition (bad index, negative weight, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed or out-of-range user data (image shape, label value, empty dataset).
    #[error("input error: {0}")]
    Input(String),

    #[error("parse error in {path}: field `{field}`: {detail}")]
    Parse {
        path: PathBuf,
        field: &'static str,
        detail: String,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SnnError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SnnError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = SnnError> = std::result::Result<T, E>;
