use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::KnnError;
use crate::ingest::{load_embeddings, EmbeddingMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Gender,
    Race,
}

impl std::str::FromStr for Attribute {
    type Err = KnnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gender" => Ok(Attribute::Gender),
            "race" => Ok(Attribute::Race),
            other => Err(KnnError::BadConfig(format!("unknown attribute {other:?}"))),
        }
    }
}

impl Attribute {
    pub fn name(self) -> &'static str {
        match self {
            Attribute::Gender => "gender",
            Attribute::Race => "race",
        }
    }
}

/// One row of the reference sidecar CSV `person_id,row,gender,race`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    pub person_id: String,
    pub row: usize,
    pub gender: String,
    pub race: String,
}

impl ReferenceEntry {
    pub fn label(&self, attribute: Attribute) -> &str {
        match attribute {
            Attribute::Gender => &self.gender,
            Attribute::Race => &self.race,
        }
    }
}

/// Labelled reference embeddings.
#[derive(Debug, Clone)]
pub struct ReferenceDb {
    entries: Vec<ReferenceEntry>,
    embeddings: EmbeddingMatrix,
}

impl ReferenceDb {
    pub fn new(entries: Vec<ReferenceEntry>, embeddings: EmbeddingMatrix) -> Result<Self, KnnError> {
        let mut ids = HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            if !ids.insert(e.person_id.as_str()) {
                return Err(KnnError::BadReference(format!("duplicate person_id {:?} (entry {i})", e.person_id)));
            }
            if e.row >= embeddings.rows() {
                return Err(KnnError::BadReference(format!(
                    "entry {:?} points at row {} of {}",
                    e.person_id,
                    e.row,
                    embeddings.rows()
                )));
            }
            if e.gender.is_empty() || e.race.is_empty() {
                return Err(KnnError::BadReference(format!("entry {:?} has an empty label", e.person_id)));
            }
        }
        Ok(ReferenceDb { entries, embeddings })
    }

    /// Load the embedding file plus its CSV sidecar.
    pub fn load(embeddings: &Path, sidecar: &Path) -> Result<Self, KnnError> {
        let matrix = load_embeddings(embeddings)?;
        let mut rdr = csv::Reader::from_path(sidecar)
            .map_err(|e| KnnError::BadReference(format!("{}: {e}", sidecar.display())))?;
        let entries = rdr
            .deserialize::<ReferenceEntry>()
            .enumerate()
            .map(|(i, r)| r.map_err(|e| KnnError::BadReference(format!("{} row {}: {e}", sidecar.display(), i + 2))))
            .collect::<Result<Vec<_>, _>>()?;
        ReferenceDb::new(entries, matrix)
    }

    /// Write the embedding file and sidecar next to each other.
    pub fn save(&self, embeddings: &Path, sidecar: &Path) -> Result<(), KnnError> {
        self.embeddings.write_to(embeddings)?;
        let mut w = csv::Writer::from_path(sidecar).map_err(|e| KnnError::BadReference(e.to_string()))?;
        for e in &self.entries {
            w.serialize(e).map_err(|e| KnnError::BadReference(e.to_string()))?;
        }
        w.flush().map_err(|e| KnnError::BadReference(e.to_string()))
    }

    pub fn entries(&self) -> &[ReferenceEntry] {
        &self.entries
    }

    pub fn embeddings(&self) -> &EmbeddingMatrix {
        &self.embeddings
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.embeddings.dims()
    }

    pub fn vector(&self, entry: usize) -> &[f32] {
        self.embeddings.row(self.entries[entry].row).expect("validated row")
    }

    pub fn vocabulary(&self, attribute: Attribute) -> BTreeSet<String> {
        self.entries.iter().map(|e| e.label(attribute).to_string()).collect()
    }

    /// Same embeddings, restricted to a subset of entries.
    pub fn with_entries(&self, entries: Vec<ReferenceEntry>) -> Result<Self, KnnError> {
        ReferenceDb::new(entries, self.embeddings.clone())
    }
}
