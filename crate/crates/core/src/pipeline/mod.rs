//! End-to-end composition: config resolution, the audit run and the
//! synthetic demo corpus.

mod config;
mod demo;
mod occupations;
mod run;
mod stages;

pub use config::{
    default_min_support, read_config, validate_config, AuditConfig, FixtureConfig, IntervalSettings, KnnSettings, PatternPaths,
    ReferencePaths, ResolvedConfig, Seeds, SuffixModeName, DEFAULT_ANALYSES, DEFAULT_POOL_SIZE, DEFAULT_TOP_FRACTION,
};
pub use demo::{write_demo, DEMO_RECORDS, DEMO_SERVICE_SAMPLE};
pub use occupations::{Occupation, OccupationTable};
pub use run::{data_versions, run_audit, NSFW_CATEGORY, TOOL_NAME, TOOL_VERSION};
pub use stages::{filter, ingest, write_jsonl, Decision, Filtered, Ingested};
