use std::path::PathBuf;

/// Everything the file formats, pipeline and CLI can fail with.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic")]
    BadMagic,
    #[error("truncated payload")]
    Truncated,
    #[error("dims/payload mismatch: {0}")]
    SizeMismatch(String),
    #[error("unsupported dtype {0}")]
    UnsupportedDtype(u8),
    #[error("parse error in {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("camera {camera_id}: {message}")]
    Camera { camera_id: String, message: String },
    #[error("sample {sample_id}: {source}")]
    Sample {
        sample_id: String,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{0}")]
    Mismatch(String),
    #[error(transparent)]
    Core(#[from] occlabel_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_sample(self, sample_id: &str) -> Self {
        match self {
            e @ Error::Sample { .. } => e,
            e => Error::Sample {
                sample_id: sample_id.to_owned(),
                source: Box::new(e),
            },
        }
    }

    /// Short stable tag for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::BadMagic | Error::Truncated | Error::SizeMismatch(_) | Error::UnsupportedDtype(_) => "tensor",
            Error::Parse { .. } => "parse",
            Error::Camera { .. } => "calibration",
            Error::Sample { source, .. } => source.kind(),
            Error::Config(_) => "config",
            Error::Mismatch(_) => "mismatch",
            Error::Core(_) => "invalid",
        }
    }

    /// Sample the error is attributed to, if any.
    pub fn sample_id(&self) -> Option<&str> {
        match self {
            Error::Sample { sample_id, .. } => Some(sample_id),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
