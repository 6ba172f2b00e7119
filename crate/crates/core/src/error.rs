use std::path::PathBuf;

use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad class of an error, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad arguments or an unsatisfiable request.
    User,
    /// The data itself is malformed, empty or unsuitable.
    Data,
    /// Filesystem or network failure.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {}", join_violations(.0))]
    InvalidDataset(Vec<Violation>),

    #[error("episode index {index} out of range (dataset has {count} episodes)")]
    EpisodeOutOfRange { index: usize, count: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic in {0}")]
    BadMagic(PathBuf),

    #[error("vault format version {found} is newer than supported version {supported}")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("checksum mismatch for {file}: expected {expected}, computed {actual}")]
    ChecksumMismatch {
        file: String,
        expected: String,
        actual: String,
    },

    #[error("missing checksum sidecar in {0}")]
    MissingChecksum(PathBuf),

    #[error("truncated vault: {0}")]
    Truncated(String),

    #[error("malformed vault: {0}")]
    Format(String),

    #[error("vault directory {0} is locked by another writer")]
    Locked(PathBuf),

    #[error("unsupported URL scheme {0:?} (expected http, https or file)")]
    UnsupportedScheme(String),

    #[error("invalid URL {url:?}: {reason}")]
    InvalidUrl { url: String, reason: String },

    #[error("network failure fetching {url}: {reason}")]
    Network { url: String, reason: String },

    #[error("archive does not contain metadata.json")]
    MissingMetadata,

    #[error("import error at line {line}: {reason}")]
    Import { line: usize, reason: String },

    #[error("no episodes")]
    NoEpisodes,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("empty input")]
    EmptyInput,

    #[error("degenerate density: samples have zero variance and no bandwidth was given")]
    DegenerateDensity,

    #[error("infeasible target: {0}")]
    InfeasibleTarget(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("return supports do not overlap")]
    DisjointSupports,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. } | Error::Network { .. } | Error::Locked(_) => ErrorClass::Io,
            Error::UnsupportedScheme(_)
            | Error::InvalidUrl { .. }
            | Error::InvalidArgument(_)
            | Error::EpisodeOutOfRange { .. } => ErrorClass::User,
            _ => ErrorClass::Data,
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
