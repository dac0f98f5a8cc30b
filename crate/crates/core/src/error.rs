use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("no tokens in corpora")]
    NoTokens,

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("empty development set")]
    EmptyDev,

    #[error("cannot redistribute mass to empty application {0}")]
    EmptyApplication(crate::corpus::ApplicationId),

    #[error("source `{0}` is empty")]
    EmptySource(String),

    #[error("mixed-application batch: AD forward needs every query tagged {expected}")]
    MixedApplicationBatch { expected: crate::corpus::ApplicationId },

    #[error("query {0} carries no application tag")]
    UntaggedQuery(usize),

    #[error("noise probability is zero for id {0}")]
    ZeroNoiseProbability(u32),

    #[error("bad magic bytes: not a model container")]
    BadMagic,

    #[error("unsupported container version {found} (expected {expected})")]
    UnsupportedVersion { found: u16, expected: u16 },

    #[error("unknown architecture tag {0}")]
    UnknownArchitecture(u8),

    #[error("vocabulary hash mismatch: file {found:016x}, expected {expected:016x}")]
    VocabMismatch { found: u64, expected: u64 },

    #[error("unexpected end of parameter blob")]
    Truncated,

    #[error("training diverged at epoch {epoch}, batch {batch}: non-finite loss")]
    Diverged { epoch: usize, batch: usize },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable numeric code for each failure class, used by the container
    /// loader and surfaced on the command line.
    pub fn code(&self) -> u16 {
        match self {
            Error::Io { .. } => 10,
            Error::NoTokens => 11,
            Error::Manifest(_) => 12,
            Error::Config(_) => 13,
            Error::Shape { .. } => 20,
            Error::NonFinite { .. } => 21,
            Error::EmptyDev => 30,
            Error::EmptyApplication(_) => 31,
            Error::EmptySource(_) => 32,
            Error::MixedApplicationBatch { .. } => 40,
            Error::UntaggedQuery(_) => 41,
            Error::ZeroNoiseProbability(_) => 42,
            Error::BadMagic => 50,
            Error::UnsupportedVersion { .. } => 51,
            Error::UnknownArchitecture(_) => 52,
            Error::VocabMismatch { .. } => 53,
            Error::Truncated => 54,
            Error::Diverged { .. } => 60,
            Error::Invalid(_) => 99,
        }
    }

    /// True for errors caused by user-supplied configuration or manifests.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Manifest(_) | Error::Config(_))
    }
}
