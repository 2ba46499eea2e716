use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: format error at byte {offset}: {message}")]
    Format {
        path: PathBuf,
        offset: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed json: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("metric undefined: {0}")]
    MetricUndefined(String),

    #[error("mining error: {0}")]
    Mining(String),

    #[error("non-finite loss {loss} for triplet (anchor {anchor}, positive {positive}, negative {negative})")]
    NonFiniteLoss {
        loss: f64,
        anchor: u32,
        positive: u32,
        negative: u32,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unknown {kind} '{name}', expected one of: {allowed}")]
    Unknown {
        kind: &'static str,
        name: String,
        allowed: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
