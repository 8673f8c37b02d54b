use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::text_annot::{PatternConfig, PatternEntry, PatternSet};

/// One occupation title with optional salary and prestige scores.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Occupation {
    pub title: String,
    pub salary: Option<f64>,
    pub prestige: Option<f64>,
}

/// Occupation table (`title,salary,prestige`) and a whole-word matcher over its titles.
#[derive(Debug, Clone)]
pub struct OccupationTable {
    pub rows: Vec<Occupation>,
    pub patterns: PatternSet,
}

impl OccupationTable {
    pub fn from_reader(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut rows: Vec<Occupation> = Vec::new();
        for (i, r) in rdr.deserialize().enumerate() {
            let mut row: Occupation =
                r.map_err(|e| Error::Config(vec![format!("occupations row {}: {e}", i + 2)]))?;
            row.title = row.title.to_lowercase();
            if row.title.is_empty() {
                return Err(Error::Config(vec![format!("occupations row {}: empty title", i + 2)]));
            }
            rows.push(row);
        }
        rows.sort_by(|a, b| a.title.cmp(&b.title));
        rows.dedup_by(|a, b| a.title == b.title);
        let patterns = PatternSet::from_config(PatternConfig {
            name: "occupations".into(),
            patterns: rows
                .iter()
                .map(|r| PatternEntry {
                    label: r.title.clone(),
                    regex: regex::escape(&r.title),
                    group: None,
                    excluded_from_reports: false,
                })
                .collect(),
            word_boundaries: true,
            lowercase: true,
        })?;
        Ok(OccupationTable { rows, patterns })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(format!("open {}", path.display()), e))?;
        Self::from_reader(f)
    }

    pub fn get(&self, title: &str) -> Option<&Occupation> {
        self.rows
            .binary_search_by(|r| r.title.as_str().cmp(title))
            .ok()
            .map(|i| &self.rows[i])
    }
}
