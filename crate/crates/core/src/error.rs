use thiserror::Error;

/// Every failure the library can surface.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("index {index} out of range for {what} (len {len})")]
    Index { what: String, index: usize, len: usize },

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("stale tape: {0}")]
    StaleTape(String),

    #[error("checkpoint incompatible: {0}")]
    Compatibility(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 data, 4 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Compatibility(_) | Error::Split(_) => 2,
            Error::Divergence(_) => 4,
            Error::Schema(_) | Error::Index { .. } | Error::Data(_) | Error::Io { .. } | Error::Json(_) => 3,
            Error::Shape { .. } | Error::Domain(_) | Error::StaleTape(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
