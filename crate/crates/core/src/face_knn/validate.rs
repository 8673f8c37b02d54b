use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{build_index, knn_annotate, GroupScore, KnnConfig, KnnError, ReferenceDb};

#[derive(Debug, Clone, PartialEq)]
pub struct UnanimityResult<K> {
    pub kept: Vec<(K, GroupScore)>,
    pub total: usize,
}

impl<K> UnanimityResult<K> {
    pub fn kept_ratio(&self) -> Option<f64> {
        (self.total > 0).then(|| self.kept.len() as f64 / self.total as f64)
    }
}

/// Keep only annotations on which all `k` neighbours agree.
pub fn unanimity_filter<K, I>(scores: I) -> UnanimityResult<K>
where
    I: IntoIterator<Item = (K, GroupScore)>,
{
    let mut total = 0;
    let kept = scores
        .into_iter()
        .inspect(|_| total += 1)
        .filter(|(_, s)| s.unanimous)
        .collect();
    UnanimityResult { kept, total }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Holdout {
    Count(usize),
    Fraction(f64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: u64,
    pub total: u64,
}

impl Accuracy {
    pub fn rate(&self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub attribute: String,
    pub k: usize,
    pub holdout: usize,
    pub overall: Accuracy,
    /// Keyed by `"<gender>/<race>"` of the held-out entries.
    pub per_group: BTreeMap<String, Accuracy>,
}

/// Train on a seeded random split of the reference db and score the rest.
pub fn holdout_validate(db: &ReferenceDb, holdout: Holdout, seed: u64, cfg: &KnnConfig) -> Result<ValidationReport, KnnError> {
    let n = db.len();
    let h = match holdout {
        Holdout::Count(c) => c,
        Holdout::Fraction(f) => (f * n as f64).round() as usize,
    };
    if h == 0 || h >= n {
        return Err(KnnError::HoldoutTooLarge { holdout: h, size: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (test, train) = order.split_at(h);
    let mut train: Vec<usize> = train.to_vec();
    train.sort_unstable();
    let train_db = db.with_entries(train.iter().map(|&i| db.entries()[i].clone()).collect())?;
    let index = build_index(&train_db)?;
    cfg.validate(index.len())?;

    let mut overall = Accuracy::default();
    let mut per_group: BTreeMap<String, Accuracy> = BTreeMap::new();
    let mut test = test.to_vec();
    test.sort_unstable();
    for i in test {
        let e = &db.entries()[i];
        let s = knn_annotate(db.vector(i), &index, cfg)?;
        let ok = s.argmax == e.label(cfg.attribute);
        for acc in [&mut overall, per_group.entry(format!("{}/{}", e.gender, e.race)).or_default()] {
            acc.total += 1;
            acc.correct += ok as u64;
        }
    }
    Ok(ValidationReport { attribute: cfg.attribute.name().into(), k: cfg.k, holdout: h, overall, per_group })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub compared: u64,
    pub matches: u64,
    pub rate: f64,
    /// `(label in a, label in b) -> count`.
    pub confusion: BTreeMap<(String, String), u64>,
}

/// Compare two annotation maps on their shared keys.
pub fn agreement_stats(a: &BTreeMap<String, String>, b: &BTreeMap<String, String>) -> Result<Agreement, KnnError> {
    let mut compared = 0;
    let mut matches = 0;
    let mut confusion: BTreeMap<(String, String), u64> = BTreeMap::new();
    for (uid, la) in a {
        if let Some(lb) = b.get(uid) {
            compared += 1;
            matches += (la == lb) as u64;
            *confusion.entry((la.clone(), lb.clone())).or_default() += 1;
        }
    }
    if compared == 0 {
        return Err(KnnError::NothingToCompare);
    }
    Ok(Agreement { compared, matches, rate: matches as f64 / compared as f64, confusion })
}
