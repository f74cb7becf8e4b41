use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length error: {0}")]
    Length(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("estimation failed: {0}")]
    Estimation(String),
    #[error("metric undefined: {0}")]
    Metric(String),
    #[error("missing prerequisite: {0}")]
    StagedDependency(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("unsupported metric: {0}")]
    UnsupportedMetric(String),
    #[error("dataset build failed: {0}")]
    Build(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },
}

impl Error {
    /// Stable identifier used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Length(_) => "length",
            Error::Contract(_) => "contract",
            Error::Shape(_) => "shape",
            Error::Config(_) => "config",
            Error::Estimation(_) => "estimation",
            Error::Metric(_) => "metric",
            Error::StagedDependency(_) => "staged_dependency",
            Error::Divergence(_) => "divergence",
            Error::UnsupportedMetric(_) => "unsupported_metric",
            Error::Build(_) => "build",
            Error::Manifest(_) => "manifest",
            Error::Checkpoint(_) => "checkpoint",
            Error::Version { .. } => "version",
            Error::Io { .. } => "io",
            Error::Wav { .. } => "wav",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
