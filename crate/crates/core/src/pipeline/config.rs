use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clients::FetchMode;
use crate::error::{Error, Result};
use crate::filter::{FilterSpec, TiePolicy};
use crate::report::ANALYSES;
use crate::source_annot::SuffixMode;
use crate::stats::IntervalMethod;

/// Analyses that need no inputs beyond the shards.
pub const DEFAULT_ANALYSES: [&str; 7] = [
    "identity_keywords",
    "intersections",
    "gender_word_gap",
    "languages",
    "cctld",
    "websites",
    "news_sites",
];

pub const DEFAULT_TOP_FRACTION: f64 = 0.30;
pub const DEFAULT_POOL_SIZE: u64 = 12_800_000_000;

/// Per-analysis minimum raw support. Keys not listed here default to 1.
pub fn default_min_support() -> BTreeMap<String, u64> {
    [
        ("intersections", 10),
        ("gender_word_gap", 100),
        ("languages", 1_000),
        ("language_trend", 100),
        ("categories", 1_000),
        ("websites", 10_000),
        ("cctld", 10_000),
        ("news_sites", 200),
        ("years", 500),
        ("ip_country", 5_000),
        ("occupations", 100),
        ("identity_keywords", 1),
        ("face_gender_age", 1),
        ("face_knn_race", 1),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternPaths {
    pub identity: Option<PathBuf>,
    pub gender: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferencePaths {
    pub embeddings: PathBuf,
    pub labels: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixtureConfig {
    pub dir: Option<PathBuf>,
    pub mode: Option<FetchMode>,
    pub requests_per_sec: f64,
    /// Where live lookups originate; recorded, not corrected for.
    pub resolver_origin: Option<String>,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig {
            dir: None,
            mode: None,
            requests_per_sec: 1.0,
            resolver_origin: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    pub sample: u64,
    pub holdout: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds { sample: 0, holdout: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnnSettings {
    pub k: usize,
    pub p: f64,
    pub unanimous_only: bool,
}

impl Default for KnnSettings {
    fn default() -> Self {
        KnnSettings {
            k: 5,
            p: 2.0,
            unanimous_only: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntervalSettings {
    pub method: IntervalMethod,
    pub confidence: f64,
}

impl Default for IntervalSettings {
    fn default() -> Self {
        IntervalSettings {
            method: IntervalMethod::default(),
            confidence: 0.95,
        }
    }
}

/// The JSON config file. Relative paths resolve against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    pub shards: Vec<String>,
    /// Image, text and face-crop matrices, in that order. One path serves all roles.
    pub embeddings: Vec<PathBuf>,
    pub threshold: Option<f64>,
    pub top_frac: Option<f64>,
    pub strict_ties: bool,
    pub analyses: Option<Vec<String>>,
    pub patterns: PatternPaths,
    pub stopwords: Option<PathBuf>,
    pub reference_db: Option<ReferencePaths>,
    pub ip_db: Option<PathBuf>,
    pub category_map: Option<PathBuf>,
    pub news_sites: Option<PathBuf>,
    pub regions: Option<PathBuf>,
    pub occupations: Option<PathBuf>,
    pub suffix_mode: SuffixModeName,
    pub fixtures: FixtureConfig,
    pub min_support: BTreeMap<String, u64>,
    pub seeds: Seeds,
    /// Seeded subsample size for the service-backed analyses.
    pub service_sample: Option<usize>,
    pub knn: KnnSettings,
    pub interval: IntervalSettings,
    pub pool_size: u64,
    pub top_k: usize,
    pub include_excluded_labels: bool,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuffixModeName {
    #[default]
    Snapshot,
    Naive,
}

impl From<SuffixModeName> for SuffixMode {
    fn from(m: SuffixModeName) -> Self {
        match m {
            SuffixModeName::Snapshot => SuffixMode::Snapshot,
            SuffixModeName::Naive => SuffixMode::Naive,
        }
    }
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            shards: Vec::new(),
            embeddings: Vec::new(),
            threshold: None,
            top_frac: None,
            strict_ties: false,
            analyses: None,
            patterns: PatternPaths::default(),
            stopwords: None,
            reference_db: None,
            ip_db: None,
            category_map: None,
            news_sites: None,
            regions: None,
            occupations: None,
            suffix_mode: SuffixModeName::default(),
            fixtures: FixtureConfig::default(),
            min_support: BTreeMap::new(),
            seeds: Seeds::default(),
            service_sample: None,
            knn: KnnSettings::default(),
            interval: IntervalSettings::default(),
            pool_size: DEFAULT_POOL_SIZE,
            top_k: 20,
            include_excluded_labels: false,
            output_dir: None,
        }
    }
}

/// A validated config with defaults filled in and paths made absolute.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    /// Config as written plus overrides, with relative paths kept relative.
    /// This is what gets hashed and recorded.
    pub recorded: AuditConfig,
    /// Same config with every path absolute.
    pub config: AuditConfig,
    pub base_dir: PathBuf,
    pub filter: FilterSpec,
    pub analyses: Vec<String>,
    pub min_support: BTreeMap<String, u64>,
    pub mode: FetchMode,
}

impl ResolvedConfig {
    pub fn enabled(&self, analysis: &str) -> bool {
        self.analyses.iter().any(|a| a == analysis)
    }

    pub fn min_support(&self, key: &str) -> u64 {
        self.min_support.get(key).copied().unwrap_or(1)
    }

    /// SHA-256 of the recorded config without the output directory.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(&self.hashed_config()).expect("config serialises")))
    }

    pub fn hashed_config(&self) -> serde_json::Value {
        let mut c = self.recorded.clone();
        c.output_dir = None;
        serde_json::to_value(&c).expect("config serialises")
    }

    pub fn output_dir(&self) -> Option<&Path> {
        self.config.output_dir.as_deref()
    }
}

fn absolutize(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl AuditConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::Config(vec!["no config: file is empty".into()]));
        }
        serde_json::from_str(text).map_err(|e| Error::Config(vec![format!("parse: {e}")]))
    }

    fn with_base(&self, base: &Path) -> AuditConfig {
        let abs = |p: &PathBuf| absolutize(base, p);
        let mut c = self.clone();
        c.shards = self
            .shards
            .iter()
            .map(|g| absolutize(base, Path::new(g)).to_string_lossy().into_owned())
            .collect();
        c.embeddings = self.embeddings.iter().map(abs).collect();
        c.patterns.identity = self.patterns.identity.as_ref().map(abs);
        c.patterns.gender = self.patterns.gender.as_ref().map(abs);
        c.stopwords = self.stopwords.as_ref().map(abs);
        c.reference_db = self.reference_db.as_ref().map(|r| ReferencePaths {
            embeddings: abs(&r.embeddings),
            labels: abs(&r.labels),
        });
        c.ip_db = self.ip_db.as_ref().map(abs);
        c.category_map = self.category_map.as_ref().map(abs);
        c.news_sites = self.news_sites.as_ref().map(abs);
        c.regions = self.regions.as_ref().map(abs);
        c.occupations = self.occupations.as_ref().map(abs);
        c.fixtures.dir = self.fixtures.dir.as_ref().map(abs);
        c.output_dir = self.output_dir.as_ref().map(abs);
        c
    }

    /// Check everything and report every problem at once. `base` anchors
    /// relative paths; `env_mode` is the mode from the environment, used when
    /// the config leaves it unset.
    pub fn resolve(&self, base: &Path, env_mode: Option<FetchMode>) -> Result<ResolvedConfig> {
        let mut errs = Vec::new();
        let config = self.with_base(base);

        let filter = match (self.threshold, self.top_frac) {
            (Some(_), Some(_)) => {
                errs.push("set exactly one of `threshold` and `top_frac`, not both".into());
                None
            }
            (Some(t), None) => Some(FilterSpec::fixed(t)),
            (None, Some(f)) => Some(FilterSpec::top_fraction(f)),
            (None, None) => Some(FilterSpec::top_fraction(DEFAULT_TOP_FRACTION)),
        }
        .map(|s| {
            s.with_ties(if self.strict_ties {
                TiePolicy::ExcludeTies
            } else {
                TiePolicy::IncludeTies
            })
        });
        if let Some(spec) = &filter {
            if let Err(e) = spec.validate() {
                errs.push(e.to_string());
            }
        }

        if config.shards.is_empty() {
            errs.push("`shards` lists no shard globs".into());
        }
        for g in &config.shards {
            match crate::ingest::ShardManifest::expand_glob(g) {
                Ok(_) => {}
                Err(e) => errs.push(e.to_string()),
            }
        }
        if config.embeddings.len() > 3 {
            errs.push(format!("`embeddings` takes at most 3 paths (image, text, face), got {}", config.embeddings.len()));
        }

        let mut check_file = |what: &str, p: &Option<PathBuf>| {
            if let Some(p) = p {
                if !p.is_file() {
                    errs.push(format!("{what}: {} does not exist", p.display()));
                }
            }
        };
        for (i, p) in config.embeddings.iter().enumerate() {
            check_file(&format!("embeddings[{i}]"), &Some(p.clone()));
        }
        check_file("patterns.identity", &config.patterns.identity);
        check_file("patterns.gender", &config.patterns.gender);
        check_file("stopwords", &config.stopwords);
        check_file("ip_db", &config.ip_db);
        check_file("category_map", &config.category_map);
        check_file("news_sites", &config.news_sites);
        check_file("regions", &config.regions);
        check_file("occupations", &config.occupations);
        if let Some(r) = &config.reference_db {
            check_file("reference_db.embeddings", &Some(r.embeddings.clone()));
            check_file("reference_db.labels", &Some(r.labels.clone()));
        }
        if let Some(d) = &config.fixtures.dir {
            if !d.is_dir() {
                errs.push(format!("fixtures.dir: {} is not a directory", d.display()));
            }
        }

        let analyses: Vec<String> = match &self.analyses {
            Some(list) => list.clone(),
            None => DEFAULT_ANALYSES.iter().map(|s| s.to_string()).collect(),
        };
        for a in &analyses {
            if !ANALYSES.contains(&a.as_str()) {
                errs.push(format!("unknown analysis {a:?}"));
            }
        }
        let wants = |a: &str| analyses.iter().any(|x| x == a);
        let needs_fixtures = ["face_gender_age", "ip_country", "categories", "years"];
        for a in needs_fixtures {
            if wants(a) && config.fixtures.dir.is_none() {
                errs.push(format!("analysis {a} needs `fixtures.dir`"));
            }
        }
        if wants("ip_country") && config.ip_db.is_none() {
            errs.push("analysis ip_country needs `ip_db`".into());
        }
        if wants("face_knn_race") {
            if config.reference_db.is_none() {
                errs.push("analysis face_knn_race needs `reference_db`".into());
            }
            if config.embeddings.is_empty() {
                errs.push("analysis face_knn_race needs face-crop `embeddings`".into());
            }
        }
        if wants("occupations") && config.occupations.is_none() {
            errs.push("analysis occupations needs an `occupations` table".into());
        }

        let mut min_support = default_min_support();
        for (k, v) in &self.min_support {
            if *v == 0 {
                errs.push(format!("min_support.{k} must be at least 1"));
            }
            if !min_support.contains_key(k) {
                errs.push(format!("unknown min_support key {k:?}"));
            }
            min_support.insert(k.clone(), *v);
        }

        if self.knn.k == 0 {
            errs.push("knn.k must be at least 1".into());
        }
        if !(self.knn.p >= 1.0 && self.knn.p.is_finite()) {
            errs.push(format!("knn.p must be a finite value >= 1, got {}", self.knn.p));
        }
        if !(self.interval.confidence > 0.0 && self.interval.confidence < 1.0) {
            errs.push(format!("interval.confidence must lie in (0,1), got {}", self.interval.confidence));
        }
        if self.pool_size == 0 {
            errs.push("pool_size must be at least 1".into());
        }
        if !(self.fixtures.requests_per_sec > 0.0) {
            errs.push("fixtures.requests_per_sec must be positive".into());
        }
        if self.service_sample == Some(0) {
            errs.push("service_sample must be at least 1 when set".into());
        }

        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        let mode = self.fixtures.mode.or(env_mode).unwrap_or_default();
        Ok(ResolvedConfig {
            recorded: self.clone(),
            config,
            base_dir: base.to_path_buf(),
            filter: filter.expect("checked above"),
            analyses,
            min_support,
            mode,
        })
    }
}

/// Read and parse a config file. Returns it with the absolute directory
/// that its relative paths are anchored to.
pub fn read_config(path: &Path) -> Result<(AuditConfig, PathBuf)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
    let cfg = AuditConfig::from_json(&text)?;
    let base = path
        .parent()
        .map(|p| if p.as_os_str().is_empty() { Path::new(".") } else { p })
        .unwrap_or(Path::new("."));
    let base = std::path::absolute(base).map_err(|e| Error::Config(vec![format!("{}: {e}", base.display())]))?;
    Ok((cfg, base))
}

/// Read, parse and resolve a config file, collecting every error.
pub fn validate_config(path: &Path) -> Result<ResolvedConfig> {
    let (cfg, base) = read_config(path)?;
    let env_mode = FetchMode::from_env().map_err(|e| Error::Config(vec![e.to_string()]))?;
    cfg.resolve(&base, Some(env_mode))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn errors(r: Result<ResolvedConfig>) -> Vec<String> {
        match r {
            Err(Error::Config(e)) => e,
            Err(e) => panic!("unexpected {e}"),
            Ok(_) => panic!("expected config errors"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.jsonl", "");
        let p = write(dir.path(), "audit.json", r#"{"shards":["*.jsonl"]}"#);
        let r = validate_config(&p).unwrap();
        assert_eq!(r.filter, FilterSpec::top_fraction(0.30));
        assert_eq!(r.min_support("intersections"), 10);
        assert_eq!(r.min_support("gender_word_gap"), 100);
        assert_eq!(r.min_support("languages"), 1_000);
        assert_eq!(r.min_support("websites"), 10_000);
        assert_eq!(r.min_support("news_sites"), 200);
        assert_eq!(r.min_support("years"), 500);
        assert_eq!(r.min_support("ip_country"), 5_000);
        assert!(r.config.shards[0].starts_with(dir.path().to_str().unwrap()));
        assert_eq!(r.recorded.shards[0], "*.jsonl");
    }

    #[test]
    fn both_filter_modes_is_an_error() {
        let cfg = AuditConfig {
            shards: vec!["x".into()],
            threshold: Some(0.243),
            top_frac: Some(0.3),
            ..Default::default()
        };
        let e = errors(cfg.resolve(Path::new("/nonexistent"), None));
        assert!(e.iter().any(|m| m.contains("exactly one")));
    }

    #[test]
    fn all_errors_reported_together() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.jsonl", "");
        let p = write(
            dir.path(),
            "audit.json",
            r#"{"shards":["*.jsonl"],"ip_db":"missing.csv","category_map":"gone.csv","analyses":["bogus"]}"#,
        );
        let e = errors(validate_config(&p));
        assert!(e.iter().any(|m| m.contains("missing.csv")), "{e:?}");
        assert!(e.iter().any(|m| m.contains("gone.csv")), "{e:?}");
        assert!(e.iter().any(|m| m.contains("bogus")), "{e:?}");
    }

    #[test]
    fn empty_file_is_no_config() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "audit.json", "  \n");
        let e = errors(validate_config(&p));
        assert!(e[0].contains("no config"));
    }

    #[test]
    fn hash_tracks_config_but_not_output_dir() {
        let base = AuditConfig {
            shards: vec!["*.jsonl".into()],
            ..Default::default()
        };
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.jsonl", "");
        let h = |c: &AuditConfig| c.resolve(dir.path(), None).unwrap().hash();
        let mut moved = base.clone();
        moved.output_dir = Some("elsewhere".into());
        assert_eq!(h(&base), h(&moved));
        let mut flipped = base.clone();
        flipped.strict_ties = true;
        assert_ne!(h(&base), h(&flipped));
    }
}
