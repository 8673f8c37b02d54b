//! The similarity-filtering decision.
//!
//! A pair is scored by the cosine similarity of its image and text
//! embeddings (or by a precomputed score shipped with the metadata) and kept
//! iff the score clears a threshold. The threshold is either fixed or resolved
//! from the score distribution as a top-fraction quantile.

mod quantile;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{EmbeddingMatrix, SampleRecord};

pub use quantile::{kth_largest, kth_largest_streaming, top_count, ScoreHistogram, BUCKETS};

/// Agreement tolerance between a shipped score and the recomputed cosine.
pub const DISCREPANCY_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("degenerate embedding: {0}")]
    DegenerateEmbedding(String),
    #[error("record {0:?} has neither a score nor resolvable embeddings")]
    Unscoreable(String),
    #[error("top-fraction threshold needs at least one score")]
    EmptyScores,
    #[error("invalid filter spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum FilterMode {
    FixedThreshold(f64),
    TopFraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// `score >= threshold` passes.
    #[default]
    IncludeTies,
    /// `score > threshold` passes.
    ExcludeTies,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub mode: FilterMode,
    #[serde(default)]
    pub tie_policy: TiePolicy,
}

impl FilterSpec {
    pub fn fixed(t: f64) -> Self {
        FilterSpec { mode: FilterMode::FixedThreshold(t), tie_policy: TiePolicy::IncludeTies }
    }

    pub fn top_fraction(f: f64) -> Self {
        FilterSpec { mode: FilterMode::TopFraction(f), tie_policy: TiePolicy::IncludeTies }
    }

    pub fn with_ties(mut self, tie_policy: TiePolicy) -> Self {
        self.tie_policy = tie_policy;
        self
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        match self.mode {
            FilterMode::FixedThreshold(t) if !(-1.0..=1.0).contains(&t) => {
                Err(FilterError::InvalidSpec(format!("threshold {t} outside [-1, 1]")))
            }
            FilterMode::TopFraction(f) if !(f > 0.0 && f <= 1.0) => {
                Err(FilterError::InvalidSpec(format!("top fraction {f} outside (0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

/// Per-sample filter decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub uid: String,
    pub score: f64,
    pub passed: bool,
}

pub fn passes(score: f64, threshold: f64, policy: TiePolicy) -> bool {
    match policy {
        TiePolicy::IncludeTies => score >= threshold,
        TiePolicy::ExcludeTies => score > threshold,
    }
}

/// Cosine similarity in `f64`, clamped to `[-1, 1]`.
pub fn cosine_similarity(u: &[f32], v: &[f32]) -> Result<f64, FilterError> {
    if u.len() != v.len() {
        return Err(FilterError::DegenerateEmbedding(format!(
            "dimension mismatch {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a as f64, b as f64);
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(FilterError::DegenerateEmbedding("zero vector".into()));
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// Resolve the threshold a spec implies for a score multiset.
///
/// Fixed mode returns its value. Top-fraction mode with `include_ties`
/// returns the `⌈fN⌉`-th largest score, so at least `⌈fN⌉` items pass and
/// every extra pass is a tie at the threshold. With `exclude_ties` it returns
/// the next rank down, so that `score > t` keeps the same top `⌈fN⌉` when
/// scores are distinct; boundary ties are then excluded.
pub fn resolve_threshold(scores: &[f64], spec: &FilterSpec) -> Result<f64, FilterError> {
    resolve_threshold_with(scores, spec, &crate::exec::Exec::sequential())
}

pub fn resolve_threshold_with(
    scores: &[f64],
    spec: &FilterSpec,
    exec: &crate::exec::Exec,
) -> Result<f64, FilterError> {
    spec.validate()?;
    let f = match spec.mode {
        FilterMode::FixedThreshold(t) => return Ok(t),
        FilterMode::TopFraction(f) => f,
    };
    if scores.is_empty() {
        return Err(FilterError::EmptyScores);
    }
    let n = scores.len();
    let k = top_count(f, n);
    let hist = ScoreHistogram::build(scores, exec);
    match spec.tie_policy {
        TiePolicy::IncludeTies => Ok(kth_largest(scores, &hist, k, exec)),
        TiePolicy::ExcludeTies if k < n => Ok(kth_largest(scores, &hist, k + 1, exec)),
        TiePolicy::ExcludeTies => {
            let min = kth_largest(scores, &hist, n, exec);
            Ok(next_down(min))
        }
    }
}

fn next_down(x: f64) -> f64 {
    if x == 0.0 {
        return -f64::from_bits(1);
    }
    let bits = x.to_bits();
    if x > 0.0 {
        f64::from_bits(bits - 1)
    } else {
        f64::from_bits(bits + 1)
    }
}

/// Which embedding matrices record row indices refer to.
#[derive(Debug, Clone, Copy, Default)]
pub struct EmbeddingRefs<'a> {
    pub image: Option<&'a EmbeddingMatrix>,
    pub text: Option<&'a EmbeddingMatrix>,
}

/// A record's similarity score and whether the shipped score disagreed with
/// the recomputed one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub score: f64,
    pub discrepancy: bool,
}

fn embedding_score(record: &SampleRecord, refs: &EmbeddingRefs<'_>) -> Option<Result<f64, FilterError>> {
    let (ii, ti) = (record.embedding_image?, record.embedding_text?);
    let (im, tm) = (refs.image?, refs.text?);
    let u = match im.row(ii) {
        Ok(r) => r,
        Err(e) => return Some(Err(FilterError::DegenerateEmbedding(e.to_string()))),
    };
    let v = match tm.row(ti) {
        Ok(r) => r,
        Err(e) => return Some(Err(FilterError::DegenerateEmbedding(e.to_string()))),
    };
    Some(cosine_similarity(u, v))
}

/// Score a record. The shipped `clip_score` takes precedence over embeddings.
pub fn score_record(record: &SampleRecord, refs: &EmbeddingRefs<'_>) -> Result<Scored, FilterError> {
    let computed = embedding_score(record, refs).transpose()?;
    match (record.clip_score, computed) {
        (Some(s), Some(c)) => Ok(Scored { score: s, discrepancy: (s - c).abs() > DISCREPANCY_TOLERANCE }),
        (Some(s), None) => Ok(Scored { score: s, discrepancy: false }),
        (None, Some(c)) => Ok(Scored { score: c, discrepancy: false }),
        (None, None) => Err(FilterError::Unscoreable(record.uid.clone())),
    }
}

pub fn apply_filter(
    record: &SampleRecord,
    threshold: f64,
    tie_policy: TiePolicy,
    refs: &EmbeddingRefs<'_>,
) -> Result<FilterOutcome, FilterError> {
    let Scored { score, .. } = score_record(record, refs)?;
    Ok(FilterOutcome {
        uid: record.uid.clone(),
        score,
        passed: passes(score, threshold, tie_policy),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cosine_identity_and_orthogonal() {
        assert_eq!(cosine_similarity(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn cosine_matches_closed_form() {
        // 32 / sqrt(14 * 77), evaluated independently at high precision.
        let expected = 0.974_631_846_197_076_2;
        let got = cosine_similarity(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((got - expected).abs() < 1e-6);
    }

    #[test]
    fn cosine_rejects_degenerate_input() {
        assert!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(cosine_similarity(&[1.0], &[1.0, 0.0]).is_err());
    }

    fn decile_scores() -> Vec<f64> {
        (1..=10).map(|i| i as f64 / 10.0).collect()
    }

    #[test]
    fn top_thirty_percent_of_deciles() {
        let t = resolve_threshold(&decile_scores(), &FilterSpec::top_fraction(0.3)).unwrap();
        assert_eq!(t, 0.8);
        let kept = decile_scores().iter().filter(|&&s| passes(s, t, TiePolicy::IncludeTies)).count();
        assert_eq!(kept, 3);
    }

    #[test]
    fn strict_policy_keeps_same_top_for_distinct_scores() {
        let spec = FilterSpec::top_fraction(0.3).with_ties(TiePolicy::ExcludeTies);
        let t = resolve_threshold(&decile_scores(), &spec).unwrap();
        assert_eq!(t, 0.7);
        let kept = decile_scores().iter().filter(|&&s| passes(s, t, TiePolicy::ExcludeTies)).count();
        assert_eq!(kept, 3);
        let all = FilterSpec::top_fraction(1.0).with_ties(TiePolicy::ExcludeTies);
        let t = resolve_threshold(&decile_scores(), &all).unwrap();
        assert!(decile_scores().iter().all(|&s| s > t));
    }

    #[test]
    fn fixed_threshold_is_returned_unchanged() {
        assert_eq!(resolve_threshold(&[0.9, 0.1], &FilterSpec::fixed(0.243)).unwrap(), 0.243);
        assert_eq!(resolve_threshold(&[], &FilterSpec::fixed(0.243)).unwrap(), 0.243);
    }

    #[test]
    fn all_equal_scores_all_pass_with_ties() {
        let scores = vec![0.5; 20];
        let t = resolve_threshold(&scores, &FilterSpec::top_fraction(0.3)).unwrap();
        assert_eq!(t, 0.5);
        assert!(scores.iter().all(|&s| passes(s, t, TiePolicy::IncludeTies)));
    }

    #[test]
    fn empty_scores_in_top_fraction_mode_fail() {
        assert_eq!(
            resolve_threshold(&[], &FilterSpec::top_fraction(0.3)),
            Err(FilterError::EmptyScores)
        );
    }

    #[test]
    fn spec_validation() {
        assert!(FilterSpec::fixed(1.5).validate().is_err());
        assert!(FilterSpec::top_fraction(0.0).validate().is_err());
        assert!(FilterSpec::top_fraction(1.0).validate().is_ok());
    }

    fn scored(clip: Option<f64>, emb: bool) -> SampleRecord {
        let mut r = SampleRecord::new("u", "https://a.b/x.jpg", "t");
        r.clip_score = clip;
        if emb {
            r.embedding_image = Some(0);
            r.embedding_text = Some(1);
        }
        r
    }

    #[test]
    fn apply_filter_examples() {
        let none = EmbeddingRefs::default();
        assert!(apply_filter(&scored(Some(0.25), false), 0.243, TiePolicy::IncludeTies, &none).unwrap().passed);
        assert!(apply_filter(&scored(Some(0.243), false), 0.243, TiePolicy::IncludeTies, &none).unwrap().passed);
        assert!(!apply_filter(&scored(Some(0.243), false), 0.243, TiePolicy::ExcludeTies, &none).unwrap().passed);

        let m = EmbeddingMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let refs = EmbeddingRefs { image: Some(&m), text: Some(&m) };
        let out = apply_filter(&scored(None, true), 0.9, TiePolicy::IncludeTies, &refs).unwrap();
        assert_eq!(out.score, 1.0);
        assert!(out.passed);

        assert!(matches!(
            apply_filter(&scored(None, false), 0.9, TiePolicy::IncludeTies, &none),
            Err(FilterError::Unscoreable(_))
        ));
    }

    #[test]
    fn shipped_score_wins_and_flags_discrepancy() {
        let m = EmbeddingMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let refs = EmbeddingRefs { image: Some(&m), text: Some(&m) };
        let s = score_record(&scored(Some(0.3), true), &refs).unwrap();
        assert_eq!(s, Scored { score: 0.3, discrepancy: true });
        let agree = score_record(&scored(Some(0.0), true), &refs).unwrap();
        assert!(!agree.discrepancy);
    }

    proptest! {
        #[test]
        fn raising_threshold_never_turns_fail_into_pass(s in -1.0f64..1.0, t in -1.0f64..1.0, d in 0.0f64..1.0) {
            for policy in [TiePolicy::IncludeTies, TiePolicy::ExcludeTies] {
                if !passes(s, t, policy) {
                    prop_assert!(!passes(s, t + d, policy));
                }
            }
        }

        #[test]
        fn cosine_is_scale_invariant(
            u in proptest::collection::vec(-10.0f32..10.0, 8),
            v in proptest::collection::vec(-10.0f32..10.0, 8),
            a in 0.01f32..100.0,
            b in 0.01f32..100.0,
        ) {
            prop_assume!(u.iter().any(|x| x.abs() > 1e-3) && v.iter().any(|x| x.abs() > 1e-3));
            let base = cosine_similarity(&u, &v).unwrap();
            let su: Vec<f32> = u.iter().map(|x| x * a).collect();
            let sv: Vec<f32> = v.iter().map(|x| x * b).collect();
            let scaled = cosine_similarity(&su, &sv).unwrap();
            prop_assert!((base - scaled).abs() < 1e-5);
        }

        #[test]
        fn top_fraction_passes_floor_or_ceil_on_distinct_scores(n in 1usize..400, f in 0.01f64..1.0, seed: u64) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut scores: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            scores.sort_by(f64::total_cmp);
            scores.dedup();
            let n = scores.len();
            let t = resolve_threshold(&scores, &FilterSpec::top_fraction(f)).unwrap();
            let kept = scores.iter().filter(|&&s| s >= t).count();
            let x = f * n as f64;
            prop_assert!(kept == x.floor() as usize || kept == x.ceil() as usize, "kept {} of {} at f={}", kept, n, f);
        }
    }
}
