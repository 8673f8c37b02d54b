use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Lines};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::record::{parse_record, RecordError, SampleRecord};
use crate::exec::Exec;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot open {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("read failed in {path} at line {line}: {source}")]
    Read {
        path: String,
        line: u64,
        #[source]
        source: std::io::Error,
    },
    #[error("bad glob {pattern:?}: {message}")]
    BadGlob { pattern: String, message: String },
    #[error("glob {0:?} matched no files")]
    NoMatch(String),
}

/// Ordered list of record shards plus the embedding files that go with them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ShardManifest {
    pub shard_paths: Vec<PathBuf>,
    pub record_count_hint: Option<u64>,
    pub embedding_paths: Vec<PathBuf>,
}

impl ShardManifest {
    /// Validate that every path exists and can be opened for reading.
    pub fn open(shard_paths: Vec<PathBuf>, embedding_paths: Vec<PathBuf>) -> Result<Self, IngestError> {
        for p in shard_paths.iter().chain(&embedding_paths) {
            File::open(p).map_err(|source| IngestError::Unreadable {
                path: p.display().to_string(),
                source,
            })?;
        }
        Ok(ShardManifest { shard_paths, record_count_hint: None, embedding_paths })
    }

    /// Shard paths matched by a glob pattern, sorted lexicographically.
    pub fn expand_glob(pattern: &str) -> Result<Vec<PathBuf>, IngestError> {
        let paths = glob::glob(pattern).map_err(|e| IngestError::BadGlob {
            pattern: pattern.to_string(),
            message: e.to_string(),
        })?;
        let mut out: Vec<PathBuf> = paths.filter_map(|p| p.ok()).filter(|p| p.is_file()).collect();
        out.sort();
        if out.is_empty() {
            return Err(IngestError::NoMatch(pattern.to_string()));
        }
        Ok(out)
    }
}

/// Line accounting for one or more shards. Merges by addition.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestTally {
    pub lines: u64,
    pub yielded: u64,
    pub skipped: BTreeMap<String, u64>,
}

impl IngestTally {
    pub fn skipped_total(&self) -> u64 {
        self.skipped.values().sum()
    }

    fn skip(&mut self, reason: &str) {
        *self.skipped.entry(reason.to_string()).or_default() += 1;
    }

    pub fn merge(&mut self, other: &IngestTally) {
        self.lines += other.lines;
        self.yielded += other.yielded;
        for (k, v) in &other.skipped {
            *self.skipped.entry(k.clone()).or_default() += v;
        }
    }
}

/// Streams records from every shard in manifest order, skipping bad lines.
pub struct ShardStream {
    paths: std::vec::IntoIter<PathBuf>,
    current: Option<(PathBuf, Lines<BufReader<File>>, u64)>,
    seen: HashSet<String>,
    tally: IngestTally,
    failed: bool,
}

/// Iterate over every parseable record of the manifest.
pub fn stream_shards(manifest: &ShardManifest) -> ShardStream {
    ShardStream {
        paths: manifest.shard_paths.clone().into_iter(),
        current: None,
        seen: HashSet::new(),
        tally: IngestTally::default(),
        failed: false,
    }
}

impl ShardStream {
    pub fn tally(&self) -> &IngestTally {
        &self.tally
    }

    fn accept(&mut self, line: &str) -> Result<SampleRecord, RecordError> {
        if line.trim().is_empty() {
            return Err(RecordError::Malformed("blank line".into()));
        }
        let rec = parse_record(line)?;
        if !self.seen.insert(rec.uid.clone()) {
            return Err(RecordError::DuplicateUid(rec.uid));
        }
        Ok(rec)
    }
}

impl Iterator for ShardStream {
    type Item = Result<SampleRecord, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            if self.current.is_none() {
                let path = self.paths.next()?;
                match File::open(&path) {
                    Ok(f) => {
                        self.seen.clear();
                        self.current = Some((path, BufReader::new(f).lines(), 0));
                    }
                    Err(source) => {
                        self.failed = true;
                        return Some(Err(IngestError::Unreadable {
                            path: path.display().to_string(),
                            source,
                        }));
                    }
                }
            }
            let (path, lines, lineno) = self.current.as_mut().unwrap();
            match lines.next() {
                None => {
                    log::debug!("finished shard {}", path.display());
                    self.current = None;
                }
                Some(Err(source)) => {
                    self.failed = true;
                    return Some(Err(IngestError::Read {
                        path: path.display().to_string(),
                        line: *lineno + 1,
                        source,
                    }));
                }
                Some(Ok(line)) => {
                    *lineno += 1;
                    self.tally.lines += 1;
                    match self.accept(&line) {
                        Ok(rec) => {
                            self.tally.yielded += 1;
                            return Some(Ok(rec));
                        }
                        Err(e) => self.tally.skip(e.reason()),
                    }
                }
            }
        }
    }
}

/// Fully read one shard.
pub fn read_shard(path: &Path) -> Result<(Vec<SampleRecord>, IngestTally), IngestError> {
    let manifest = ShardManifest {
        shard_paths: vec![path.to_path_buf()],
        ..Default::default()
    };
    let mut stream = stream_shards(&manifest);
    let records = stream.by_ref().collect::<Result<Vec<_>, _>>()?;
    Ok((records, stream.tally))
}

/// Read all shards, one worker per shard, concatenating in manifest order.
pub fn read_shards(
    manifest: &ShardManifest,
    exec: &Exec,
) -> Result<(Vec<SampleRecord>, IngestTally), IngestError> {
    let parts = exec.map(&manifest.shard_paths, |p| read_shard(p));
    let mut records = Vec::new();
    let mut tally = IngestTally::default();
    for part in parts {
        let (recs, t) = part?;
        records.extend(recs);
        tally.merge(&t);
    }
    Ok((records, tally))
}
