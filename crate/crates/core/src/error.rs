use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value or wavenumber falls outside the span it must lie in.
    #[error("out of range: {0}")]
    Range(String),

    /// Two collections that must be index-aligned are not.
    #[error("alignment mismatch: {0}")]
    Alignment(String),

    /// A domain invariant was violated at construction.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("parse error in {path} at row {row}: {reason}")]
    Parse {
        path: PathBuf,
        row: usize,
        reason: String,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no admissible profile: {0}")]
    NoSelection(String),

    #[error("empty footprint: no map cell within {radius_km} km of ({lat}, {lon})")]
    EmptyFootprint { lat: f64, lon: f64, radius_km: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(path: &std::path::Path, row: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_path_buf(),
            row,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Short stable tag for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Range(_) => "range",
            Error::Alignment(_) => "alignment",
            Error::Invalid { .. } => "invalid",
            Error::Parse { .. } => "parse",
            Error::InsufficientData(_) => "insufficient_data",
            Error::NoSelection(_) => "no_selection",
            Error::EmptyFootprint { .. } => "empty_footprint",
            Error::Numerical(_) => "numerical",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
        }
    }
}
