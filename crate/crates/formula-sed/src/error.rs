use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied argument violated a precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A value fell outside the range owned by a parameter group.
    #[error("value out of range: {0}")]
    Range(String),

    /// Linear-algebra failure that survived the jitter ladder; the caller
    /// should resample hyperparameters.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A single source event could not be synthesized after bounded retries.
    #[error("event synthesis failed: {0}")]
    Event(String),

    /// A clip could not be generated after the retry policy was exhausted.
    #[error("clip {clip_id} failed: {reason}")]
    Clip { clip_id: u64, reason: String },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed dataset: {0}")]
    Dataset(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
