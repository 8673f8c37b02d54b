//! Audit report assembly: per-analysis CSV tables plus a provenance
//! manifest, written byte-deterministically.

mod manifest;
mod tables;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use manifest::{
    Extrapolation, ExtrapolationInterval, FilterSummary, IngestSummary, KnnSummary, Manifest, NetworkSummary,
    TableSummary, TrendSummary,
};
pub use tables::{compare_rates, group_stats_table, intersection_table, word_gap_table, GroupStatsOptions};

use crate::error::{Error, Result};

/// Every analysis the pipeline can produce, in emission order.
pub const ANALYSES: [&str; 13] = [
    "identity_keywords",
    "intersections",
    "gender_word_gap",
    "face_gender_age",
    "face_knn_race",
    "languages",
    "cctld",
    "ip_country",
    "websites",
    "news_sites",
    "categories",
    "years",
    "occupations",
];

pub const GROUP_COLUMNS: [&str; 9] = [
    "dimension",
    "label",
    "raw",
    "passed",
    "pass_rate",
    "ci_low",
    "ci_high",
    "amplification",
    "suppressed",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Text(String),
    Int(u64),
    /// `None` renders as an empty field (undefined or suppressed).
    Float(Option<f64>),
    Bool(bool),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(n) => n.to_string(),
            Cell::Float(None) => String::new(),
            Cell::Float(Some(x)) => {
                let s = format!("{x:.6}");
                if s == "-0.000000" {
                    "0.000000".into()
                } else {
                    s
                }
            }
            Cell::Bool(b) => b.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub min_support: Option<u64>,
    pub suppressed: usize,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str], min_support: Option<u64>) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            min_support,
            suppressed: 0,
        }
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns).expect("write to Vec");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("write to Vec");
        }
        w.into_inner().expect("flush to Vec")
    }

    pub fn summary(&self) -> TableSummary {
        TableSummary {
            file: format!("{}.csv", self.name),
            rows: self.rows.len(),
            min_support: self.min_support,
            suppressed: self.suppressed,
        }
    }
}

/// Serialisable so the `stats` and `report` stages can hand it over on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub manifest: Manifest,
    pub tables: BTreeMap<String, Table>,
}

impl AuditReport {
    pub fn new(mut manifest: Manifest, tables: Vec<Table>) -> Self {
        let tables: BTreeMap<String, Table> = tables.into_iter().map(|t| (t.name.clone(), t)).collect();
        manifest.tables = tables.iter().map(|(k, t)| (k.clone(), t.summary())).collect();
        AuditReport { manifest, tables }
    }
}

/// Write one CSV per table plus `manifest.json`. Returns the written paths.
pub fn emit_tables(report: &AuditReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("create {}", out_dir.display()), e))?;
    let mut written = Vec::new();
    for table in report.tables.values() {
        let path = out_dir.join(format!("{}.csv", table.name));
        std::fs::write(&path, table.to_csv()).map_err(|e| Error::io(format!("write {}", path.display()), e))?;
        written.push(path);
    }
    let path = out_dir.join("manifest.json");
    std::fs::write(&path, report.manifest.to_json()).map_err(|e| Error::io(format!("write {}", path.display()), e))?;
    written.push(path);
    Ok(written)
}
