use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use poolaudit_core::clients::FetchMode;
use poolaudit_core::pipeline::{AuditConfig, ReferencePaths, SuffixModeName};
use poolaudit_core::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "poolaudit", about = "Audit who survives similarity filtering of image-text data")]
pub struct Cli {
    /// Worker threads. Defaults to the available parallelism.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a config and print it fully resolved, or list every problem.
    Validate(Overrides),
    /// Read and validate shards; write the surviving records as JSON lines.
    Ingest {
        #[command(flatten)]
        cfg: Overrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score records, resolve the threshold and write scored records.
    Filter {
        #[command(flatten)]
        cfg: Overrides,
        #[arg(long)]
        out: PathBuf,
        /// Keep only passing records.
        #[arg(long)]
        passed_only: bool,
    },
    /// Keyword and source annotations per scored record.
    Annotate {
        #[command(flatten)]
        cfg: Overrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// Nearest-neighbour group scores for single-face records.
    Knn {
        #[command(flatten)]
        cfg: Overrides,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "race")]
        attribute: AttributeArg,
    },
    /// Run every enabled analysis and write the report as one JSON file.
    Stats {
        #[command(flatten)]
        cfg: Overrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a `stats` JSON file into CSV tables and manifest.json.
    Report {
        /// Output of `poolaudit stats`.
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// The whole pipeline: ingest, filter, annotate, stats and report.
    Run {
        #[command(flatten)]
        cfg: Overrides,
        /// Report directory; overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the synthetic demo corpus and its config.
    Demo {
        dir: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Also run the audit into `<dir>/report`.
        #[arg(long)]
        run: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AttributeArg {
    Gender,
    Race,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Replay,
    Record,
    Live,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SuffixArg {
    Snapshot,
    Naive,
}

/// A config file plus flags that override its fields. Flags win.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON config file. Without it, flags alone describe the run.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Shard glob; repeat for several.
    #[arg(long = "shards", value_name = "GLOB")]
    pub shards: Vec<String>,
    /// Embedding matrix: image, then text, then face crops.
    #[arg(long = "embeddings", value_name = "PATH")]
    pub embeddings: Vec<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub top_frac: Option<f64>,
    /// Exclude scores tied with the resolved threshold.
    #[arg(long)]
    pub strict_ties: bool,
    /// Comma-separated analysis names.
    #[arg(long, value_delimiter = ',')]
    pub analyses: Option<Vec<String>>,
    #[arg(long, requires = "reference_labels")]
    pub reference_embeddings: Option<PathBuf>,
    #[arg(long, requires = "reference_embeddings")]
    pub reference_labels: Option<PathBuf>,
    #[arg(long)]
    pub ip_db: Option<PathBuf>,
    #[arg(long)]
    pub occupations: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub suffix_mode: Option<SuffixArg>,
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// `analysis=count`; repeat for several.
    #[arg(long = "min-support", value_name = "KEY=N")]
    pub min_support: Vec<String>,
    /// Seed for both the service sample and the holdout split.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub service_sample: Option<usize>,
}

fn abs(p: &Path) -> Result<PathBuf> {
    std::path::absolute(p).map_err(|e| Error::io(format!("resolve {}", p.display()), e))
}

impl Overrides {
    /// Load the config (if any) and apply the flags. Returns the config and
    /// the directory its relative paths resolve against.
    pub fn load(&self) -> Result<(AuditConfig, PathBuf)> {
        let (mut c, base) = match &self.config {
            Some(p) => poolaudit_core::pipeline::read_config(p)?,
            None => (AuditConfig::default(), abs(Path::new("."))?),
        };
        let mut errors = Vec::new();
        if !self.shards.is_empty() {
            c.shards = self
                .shards
                .iter()
                .map(|g| abs(Path::new(g)).map(|p| p.to_string_lossy().into_owned()))
                .collect::<Result<_>>()?;
        }
        if !self.embeddings.is_empty() {
            c.embeddings = self.embeddings.iter().map(|p| abs(p)).collect::<Result<_>>()?;
        }
        match (self.threshold, self.top_frac) {
            (Some(t), None) => {
                c.threshold = Some(t);
                c.top_frac = None;
            }
            (None, Some(f)) => {
                c.threshold = None;
                c.top_frac = Some(f);
            }
            (Some(_), Some(_)) => errors.push("--threshold and --top-frac are mutually exclusive".to_string()),
            (None, None) => {}
        }
        if self.strict_ties {
            c.strict_ties = true;
        }
        if let Some(a) = &self.analyses {
            c.analyses = Some(a.clone());
        }
        if let (Some(e), Some(l)) = (&self.reference_embeddings, &self.reference_labels) {
            c.reference_db = Some(ReferencePaths {
                embeddings: abs(e)?,
                labels: abs(l)?,
            });
        }
        if let Some(p) = &self.ip_db {
            c.ip_db = Some(abs(p)?);
        }
        if let Some(p) = &self.occupations {
            c.occupations = Some(abs(p)?);
        }
        if let Some(m) = self.suffix_mode {
            c.suffix_mode = match m {
                SuffixArg::Snapshot => SuffixModeName::Snapshot,
                SuffixArg::Naive => SuffixModeName::Naive,
            };
        }
        if let Some(p) = &self.fixtures {
            c.fixtures.dir = Some(abs(p)?);
        }
        if let Some(m) = self.mode {
            c.fixtures.mode = Some(match m {
                ModeArg::Replay => FetchMode::Replay,
                ModeArg::Record => FetchMode::Record,
                ModeArg::Live => FetchMode::Live,
            });
        }
        for kv in &self.min_support {
            match kv.split_once('=').map(|(k, v)| (k.trim(), v.trim().parse::<u64>())) {
                Some((k, Ok(n))) => {
                    c.min_support.insert(k.to_string(), n);
                }
                _ => errors.push(format!("--min-support {kv:?}: expected KEY=N")),
            }
        }
        if let Some(s) = self.seed {
            c.seeds.sample = s;
            c.seeds.holdout = s;
        }
        if let Some(n) = self.service_sample {
            c.service_sample = Some(n);
        }
        if errors.is_empty() {
            Ok((c, base))
        } else {
            Err(Error::Config(errors))
        }
    }
}
