//! Pass-rate auditing for similarity-filtered image-text metadata.

pub mod clients;
pub mod error;
pub mod exec;
pub mod face_knn;
pub mod filter;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod source_annot;
pub mod stats;
pub mod text_annot;

pub use error::{Error, Result};
pub use exec::Exec;
