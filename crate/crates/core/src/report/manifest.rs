use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::clients::Coverage;
use crate::filter::FilterSpec;
use crate::stats::{IntervalMethod, TrendResult};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IngestSummary {
    pub shards: usize,
    pub lines: u64,
    pub records: u64,
    pub skipped: BTreeMap<String, u64>,
    /// Size of the seeded subsample used by service-backed analyses.
    pub service_sample: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FilterSummary {
    pub spec: Option<FilterSpec>,
    pub resolved_threshold: f64,
    pub scored: u64,
    pub unscoreable: u64,
    pub passed: u64,
    pub pass_rate: Option<f64>,
    pub discrepancies: u64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NetworkSummary {
    pub mode: String,
    pub offline: bool,
    pub resolver_origin: Option<String>,
    pub fixture_hash: Option<String>,
    pub coverage: BTreeMap<String, Coverage>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TableSummary {
    pub file: String,
    pub rows: usize,
    pub min_support: Option<u64>,
    pub suppressed: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrendSummary {
    pub x: String,
    pub y: String,
    pub points: usize,
    pub result: Option<TrendResult>,
    /// Why no fit was produced, when `result` is absent.
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtrapolationInterval {
    pub method: IntervalMethod,
    pub confidence: f64,
    pub point: f64,
    pub low: f64,
    pub high: f64,
    pub pool_low: u64,
    pub pool_high: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Extrapolation {
    pub successes: u64,
    pub trials: u64,
    pub pool_size: u64,
    pub intervals: Vec<ExtrapolationInterval>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnSummary {
    pub attribute: String,
    pub k: usize,
    pub p: f64,
    pub unanimous_only: bool,
    pub reference_size: usize,
    pub single_face_records: u64,
    pub multi_face_skipped: u64,
    pub annotated: u64,
    pub kept: u64,
}

/// Run provenance. Contains nothing schedule- or clock-dependent so that
/// reruns produce identical bytes.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub data_versions: BTreeMap<String, String>,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub analyses: Vec<String>,
    pub min_support: BTreeMap<String, u64>,
    pub ingest: IngestSummary,
    pub filter: FilterSummary,
    pub network: NetworkSummary,
    pub tables: BTreeMap<String, TableSummary>,
    pub trends: BTreeMap<String, TrendSummary>,
    pub extrapolations: BTreeMap<String, Extrapolation>,
    pub knn: Option<KnnSummary>,
}

impl Manifest {
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("manifest serialises");
        out.push(b'\n');
        out
    }
}
