//! kNN group imputation over face-crop embeddings against a labelled
//! reference database, with unanimity confidence, holdout validation,
//! cross-annotator agreement and a PCA projection for inspection.

mod index;
mod pca;
mod reference;
mod validate;

use thiserror::Error;

use crate::ingest::EmbeddingError;

pub use index::{build_index, knn_annotate, knn_annotate_batch, minkowski_key, GroupScore, KnnConfig, KnnIndex, Neighbor};
pub use pca::{pca_project, PcaResult};
pub use reference::{Attribute, ReferenceDb, ReferenceEntry};
pub use validate::{agreement_stats, holdout_validate, unanimity_filter, Agreement, Holdout, UnanimityResult, ValidationReport};

#[derive(Debug, Error)]
pub enum KnnError {
    #[error("reference database is empty")]
    EmptyDb,
    #[error("query has {got} dims, reference has {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("bad kNN config: {0}")]
    BadConfig(String),
    #[error("holdout of {holdout} leaves nothing to train on (db size {size})")]
    HoldoutTooLarge { holdout: usize, size: usize },
    #[error("annotation sets share no keys")]
    NothingToCompare,
    #[error("degenerate data for PCA: {0}")]
    Degenerate(String),
    #[error("bad reference database: {0}")]
    BadReference(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}
