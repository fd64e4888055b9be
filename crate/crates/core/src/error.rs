use std::path::PathBuf;

/// Errors produced anywhere in the re-identification pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Tensor shapes that do not fit the operation.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Out-of-range hyperparameter, label, count or similar argument.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Cross-referenced data that disagrees (e.g. a match key missing from a camera).
    #[error("consistency error: {0}")]
    Consistency(String),

    /// Manifest validation failures; every offender is listed.
    #[error("validation error: {}", .0.join("; "))]
    Validation(Vec<String>),

    /// Malformed or mismatched model/manifest file.
    #[error("format error: {0}")]
    Format(String),

    /// File system failure with the offending path.
    #[error("storage error at {path}: {source}")]
    Storage {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Image decoding/encoding failure.
    #[error("image error at {path}: {message}")]
    Image { path: PathBuf, message: String },

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch} (non-finite loss){}", match .checkpoint {
        Some(p) => format!("; last checkpoint: {}", p.display()),
        None => String::from("; no checkpoint written"),
    })]
    Diverged {
        epoch: usize,
        checkpoint: Option<PathBuf>,
    },
}

impl Error {
    pub(crate) fn storage(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Storage {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
