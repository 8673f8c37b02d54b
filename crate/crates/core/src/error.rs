use thiserror::Error;

use crate::clients::ClientError;
use crate::face_knn::KnnError;
use crate::filter::FilterError;
use crate::ingest::{EmbeddingError, IngestError};
use crate::source_annot::SourceError;
use crate::stats::StatsError;
use crate::text_annot::PatternError;

/// Process exit codes for the command-line front end.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const FIXTURE_MISS: i32 = 3;
    pub const IO: i32 = 4;
    pub const INTERNAL: i32 = 5;
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("ingest: {0}")]
    Ingest(#[from] IngestError),
    #[error("embeddings: {0}")]
    Embedding(#[from] EmbeddingError),
    #[error("filter: {0}")]
    Filter(#[from] FilterError),
    #[error("text_annot: {0}")]
    Pattern(#[from] PatternError),
    #[error("face_knn: {0}")]
    Knn(#[from] KnnError),
    #[error("source_annot: {0}")]
    Source(#[from] SourceError),
    #[error("clients: {0}")]
    Client(#[from] ClientError),
    #[error("stats: {0}")]
    Stats(#[from] StatsError),
    #[error("io: {context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invariant breach: {0}")]
    Invariant(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => exit::CONFIG,
            Error::Client(ClientError::FixtureMissing { .. }) => exit::FIXTURE_MISS,
            Error::Client(_)
            | Error::Io { .. }
            | Error::Ingest(_)
            | Error::Embedding(_)
            | Error::Source(_)
            | Error::Pattern(_)
            | Error::Filter(_)
            | Error::Knn(_) => exit::IO,
            Error::Stats(_) | Error::Invariant(_) => exit::INTERNAL,
        }
    }
}
