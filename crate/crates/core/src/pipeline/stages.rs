//! Pipeline stages shared by `run_audit` and the staged CLI subcommands.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ResolvedConfig;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::filter::{passes, resolve_threshold_with, score_record, EmbeddingRefs, FilterError};
use crate::ingest::{load_embeddings, read_shards, EmbeddingMatrix, IngestTally, SampleRecord, ShardManifest};

/// Records and embedding matrices loaded from the configured shards.
pub struct Ingested {
    pub shards: usize,
    pub records: Vec<SampleRecord>,
    pub tally: IngestTally,
    /// Matrices in config order: image, then text, then face crops.
    pub embeddings: Vec<EmbeddingMatrix>,
}

impl Ingested {
    pub fn image(&self) -> Option<&EmbeddingMatrix> {
        self.embeddings.first()
    }

    /// Text rows fall back to the image matrix when only one is given.
    pub fn text(&self) -> Option<&EmbeddingMatrix> {
        self.embeddings.get(1).or(self.image())
    }

    /// Face-crop rows: the third matrix, or the only one.
    pub fn face(&self) -> Option<&EmbeddingMatrix> {
        match self.embeddings.len() {
            1 => self.embeddings.first(),
            _ => self.embeddings.get(2),
        }
    }
}

/// Expand shard globs (deduplicated, first occurrence wins) and read them.
pub fn ingest(cfg: &ResolvedConfig, exec: &Exec) -> Result<Ingested> {
    let c = &cfg.config;
    let mut shard_paths: Vec<PathBuf> = Vec::new();
    for g in &c.shards {
        for p in ShardManifest::expand_glob(g)? {
            if !shard_paths.contains(&p) {
                shard_paths.push(p);
            }
        }
    }
    let manifest = ShardManifest::open(shard_paths, c.embeddings.clone())?;
    let (records, tally) = read_shards(&manifest, exec)?;
    log::info!(
        "ingest: {} shards, {} lines, {} records, {} skipped",
        manifest.shard_paths.len(),
        tally.lines,
        records.len(),
        tally.skipped_total()
    );
    let embeddings = exec
        .map(&manifest.embedding_paths, |p| load_embeddings(p))
        .into_iter()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(Ingested {
        shards: manifest.shard_paths.len(),
        records,
        tally,
        embeddings,
    })
}

/// Per-record filter decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decision {
    /// Index into `Ingested::records`.
    pub index: usize,
    pub score: f64,
    pub passed: bool,
}

pub struct Filtered {
    pub threshold: f64,
    /// Scoreable records in input order.
    pub decisions: Vec<Decision>,
    pub unscoreable: u64,
    pub discrepancies: u64,
}

impl Filtered {
    pub fn passed(&self) -> u64 {
        self.decisions.iter().filter(|d| d.passed).count() as u64
    }
}

/// Score every record, resolve the threshold and decide pass/fail.
/// Records with no usable score are counted and left out.
pub fn filter(ing: &Ingested, cfg: &ResolvedConfig, exec: &Exec) -> Result<Filtered> {
    let refs = EmbeddingRefs {
        image: ing.image(),
        text: ing.text(),
    };
    let scored = exec.map(&ing.records, |r| score_record(r, &refs));
    let mut kept: Vec<(usize, f64)> = Vec::with_capacity(ing.records.len());
    let mut unscoreable = 0u64;
    let mut discrepancies = 0u64;
    for (i, s) in scored.into_iter().enumerate() {
        match s {
            Ok(s) => {
                discrepancies += s.discrepancy as u64;
                kept.push((i, s.score));
            }
            Err(FilterError::Unscoreable(_)) | Err(FilterError::DegenerateEmbedding(_)) => unscoreable += 1,
            Err(e) => return Err(e.into()),
        }
    }
    let scores: Vec<f64> = kept.iter().map(|k| k.1).collect();
    let threshold = resolve_threshold_with(&scores, &cfg.filter, exec)?;
    let decisions: Vec<Decision> = kept
        .into_iter()
        .map(|(index, score)| Decision {
            index,
            score,
            passed: passes(score, threshold, cfg.filter.tie_policy),
        })
        .collect();
    let out = Filtered {
        threshold,
        decisions,
        unscoreable,
        discrepancies,
    };
    log::info!(
        "filter: threshold {threshold}, {} of {} scored records pass ({unscoreable} unscoreable)",
        out.passed(),
        out.decisions.len()
    );
    Ok(out)
}

/// Write serialisable rows as JSON lines.
pub fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<u64> {
    let err = |e: std::io::Error| Error::io(format!("write {}", path.display()), e);
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(err)?;
    }
    let mut w = BufWriter::new(std::fs::File::create(path).map_err(err)?);
    let mut n = 0;
    for row in rows {
        serde_json::to_writer(&mut w, &row).map_err(|e| err(e.into()))?;
        w.write_all(b"\n").map_err(err)?;
        n += 1;
    }
    w.flush().map_err(err)?;
    Ok(n)
}
