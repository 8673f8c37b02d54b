//! Exact order statistics over scores in `[-1, 1]` with bounded memory.
//!
//! Pass one builds a 2^16-bucket histogram (partial histograms merge by
//! addition); pass two collects only the scores that fall in the bucket
//! holding the requested rank and selects within it.

use crate::exec::Exec;

pub const BUCKETS: usize = 1 << 16;

/// Number of items a top fraction `f` of `n` keeps: `⌈f·n⌉`, where products
/// within 1e-9 (relative) of an integer count as that integer so that
/// `0.3 × 12_800_000` keeps exactly 3,840,000.
pub fn top_count(f: f64, n: usize) -> usize {
    let x = f * n as f64;
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * x.abs().max(1.0) { r } else { x.ceil() };
    (k as usize).clamp(1, n.max(1))
}

fn bucket_of(score: f64) -> usize {
    let b = ((score.clamp(-1.0, 1.0) + 1.0) * (BUCKETS as f64 / 2.0)).floor();
    (b as usize).min(BUCKETS - 1)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreHistogram {
    counts: Vec<u64>,
}

impl Default for ScoreHistogram {
    fn default() -> Self {
        ScoreHistogram { counts: vec![0; BUCKETS] }
    }
}

impl ScoreHistogram {
    pub fn add(&mut self, score: f64) {
        self.counts[bucket_of(score)] += 1;
    }

    pub fn merge(mut self, other: &ScoreHistogram) -> Self {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn build(scores: &[f64], exec: &Exec) -> Self {
        let chunks: Vec<&[f64]> = scores.chunks(chunk_len(scores.len(), exec)).collect();
        let parts = exec.map(&chunks, |c| {
            let mut h = ScoreHistogram::default();
            c.iter().for_each(|&s| h.add(s));
            h
        });
        parts.iter().fold(ScoreHistogram::default(), |acc, h| acc.merge(h))
    }

    /// Bucket holding the `k`-th largest score (1-based) and how many scores
    /// lie in strictly higher buckets.
    pub fn locate(&self, k: u64) -> Option<(usize, u64)> {
        let mut above = 0u64;
        for b in (0..BUCKETS).rev() {
            let c = self.counts[b];
            if above + c >= k {
                return Some((b, above));
            }
            above += c;
        }
        None
    }
}

fn chunk_len(n: usize, exec: &Exec) -> usize {
    let parts = exec.workers() * 4;
    n.div_ceil(parts).max(1 << 14)
}

fn select_in_bucket(mut candidates: Vec<f64>, rank_in_bucket: usize) -> f64 {
    candidates.sort_unstable_by(|a, b| b.total_cmp(a));
    candidates[rank_in_bucket]
}

/// The `k`-th largest element (1-based) of `scores`.
pub fn kth_largest(scores: &[f64], hist: &ScoreHistogram, k: usize, exec: &Exec) -> f64 {
    assert!(k >= 1 && k <= scores.len(), "rank {k} out of 1..={}", scores.len());
    let (bucket, above) = hist.locate(k as u64).expect("histogram covers all scores");
    let chunks: Vec<&[f64]> = scores.chunks(chunk_len(scores.len(), exec)).collect();
    let parts = exec.map(&chunks, |c| {
        c.iter().copied().filter(|&s| bucket_of(s) == bucket).collect::<Vec<f64>>()
    });
    let candidates: Vec<f64> = parts.into_iter().flatten().collect();
    select_in_bucket(candidates, k - 1 - above as usize)
}

/// Out-of-core variant: `pass` must yield the same score sequence each time
/// it is called. It is called exactly twice.
pub fn kth_largest_streaming<I, F>(pass: F, k: usize) -> Option<f64>
where
    F: Fn() -> I,
    I: Iterator<Item = f64>,
{
    let mut hist = ScoreHistogram::default();
    pass().for_each(|s| hist.add(s));
    if k == 0 || k as u64 > hist.total() {
        return None;
    }
    let (bucket, above) = hist.locate(k as u64)?;
    let candidates: Vec<f64> = pass().filter(|&s| bucket_of(s) == bucket).collect();
    Some(select_in_bucket(candidates, k - 1 - above as usize))
}
