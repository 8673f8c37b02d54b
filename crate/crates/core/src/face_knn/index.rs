use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use super::{Attribute, KnnError, ReferenceDb};
use crate::exec::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
    /// Minkowski order, `p >= 1`.
    pub p: f64,
    pub attribute: Attribute,
}

impl KnnConfig {
    pub fn gender() -> Self {
        KnnConfig { k: 7, p: 2.0, attribute: Attribute::Gender }
    }

    pub fn race() -> Self {
        KnnConfig { k: 5, p: 2.0, attribute: Attribute::Race }
    }

    pub fn validate(&self, reference_size: usize) -> Result<(), KnnError> {
        if self.k == 0 || self.k > reference_size {
            return Err(KnnError::BadConfig(format!("k = {} outside 1..={reference_size}", self.k)));
        }
        if !(self.p >= 1.0) || !self.p.is_finite() {
            return Err(KnnError::BadConfig(format!("Minkowski order {} < 1", self.p)));
        }
        Ok(())
    }
}

/// `Σ |u_i - v_i|^p`, the Minkowski distance raised to the `p`-th power.
///
/// Neighbours are ranked on this key; it orders identically to the distance
/// itself and avoids a root per candidate.
pub fn minkowski_key(u: &[f32], v: &[f32], p: f64) -> f64 {
    let mut acc = 0.0f64;
    for (&a, &b) in u.iter().zip(v) {
        acc += term(a as f64 - b as f64, p);
    }
    acc
}

#[inline]
fn term(d: f64, p: f64) -> f64 {
    if p == 1.0 {
        d.abs()
    } else if p == 2.0 {
        d * d
    } else {
        d.abs().powf(p)
    }
}

/// Exact kNN index. Entries are stored sorted by `person_id`, so position
/// order is the tie-break order.
#[derive(Debug, Clone)]
pub struct KnnIndex {
    dims: usize,
    vectors: Vec<f32>,
    person_ids: Vec<String>,
    gender: Vec<String>,
    race: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub person_id: String,
    pub key: f64,
    pub distance: f64,
    pub label: String,
}

pub fn build_index(db: &ReferenceDb) -> Result<KnnIndex, KnnError> {
    if db.is_empty() {
        return Err(KnnError::EmptyDb);
    }
    let mut order: Vec<usize> = (0..db.len()).collect();
    order.sort_by(|&a, &b| db.entries()[a].person_id.cmp(&db.entries()[b].person_id));
    let mut idx = KnnIndex {
        dims: db.dims(),
        vectors: Vec::with_capacity(db.len() * db.dims()),
        person_ids: Vec::with_capacity(db.len()),
        gender: Vec::with_capacity(db.len()),
        race: Vec::with_capacity(db.len()),
    };
    for i in order {
        let e = &db.entries()[i];
        idx.vectors.extend_from_slice(db.vector(i));
        idx.person_ids.push(e.person_id.clone());
        idx.gender.push(e.gender.clone());
        idx.race.push(e.race.clone());
    }
    Ok(idx)
}

#[derive(PartialEq)]
struct Candidate {
    key: f64,
    pos: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key).then(self.pos.cmp(&other.pos))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl KnnIndex {
    pub fn len(&self) -> usize {
        self.person_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.person_ids.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    fn labels(&self, attribute: Attribute) -> &[String] {
        match attribute {
            Attribute::Gender => &self.gender,
            Attribute::Race => &self.race,
        }
    }

    /// The `k` nearest entries ordered by `(distance, person_id)`.
    pub fn nearest(&self, query: &[f32], k: usize, p: f64, attribute: Attribute) -> Result<Vec<Neighbor>, KnnError> {
        if query.len() != self.dims {
            return Err(KnnError::DimMismatch { expected: self.dims, got: query.len() });
        }
        let k = k.min(self.len());
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        for pos in 0..self.len() {
            let v = &self.vectors[pos * self.dims..(pos + 1) * self.dims];
            let bound = if heap.len() == k { heap.peek().map(|c| c.key) } else { None };
            let mut acc = 0.0f64;
            let mut abandoned = false;
            for (&a, &b) in query.iter().zip(v) {
                acc += term(a as f64 - b as f64, p);
                // A partial sum already above the k-th best can never win,
                // not even on the person_id tie-break.
                if bound.is_some_and(|w| acc > w) {
                    abandoned = true;
                    break;
                }
            }
            if abandoned {
                continue;
            }
            let cand = Candidate { key: acc, pos };
            if heap.len() < k {
                heap.push(cand);
            } else if cand < *heap.peek().unwrap() {
                heap.pop();
                heap.push(cand);
            }
        }
        let labels = self.labels(attribute);
        Ok(heap
            .into_sorted_vec()
            .into_iter()
            .map(|c| Neighbor {
                person_id: self.person_ids[c.pos].clone(),
                key: c.key,
                distance: c.key.powf(1.0 / p),
                label: labels[c.pos].clone(),
            })
            .collect())
    }
}

/// Label distribution among the `k` nearest neighbours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupScore {
    pub k: usize,
    pub counts: BTreeMap<String, usize>,
    pub distribution: BTreeMap<String, f64>,
    pub argmax: String,
    pub unanimous: bool,
}

impl GroupScore {
    /// Votes are uniform. Among labels tied on count, the winner is the one
    /// whose closest member ranks first in `(distance, person_id)` order.
    pub fn from_neighbors(neighbors: &[Neighbor]) -> Self {
        let k = neighbors.len();
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for n in neighbors {
            *counts.entry(n.label.clone()).or_default() += 1;
        }
        let best = counts.values().copied().max().unwrap_or(0);
        let argmax = neighbors
            .iter()
            .find(|n| counts[&n.label] == best)
            .map(|n| n.label.clone())
            .unwrap_or_default();
        let distribution = counts.iter().map(|(l, &c)| (l.clone(), c as f64 / k as f64)).collect();
        GroupScore { k, unanimous: counts.len() == 1, counts, distribution, argmax }
    }
}

pub fn knn_annotate(query: &[f32], index: &KnnIndex, cfg: &KnnConfig) -> Result<GroupScore, KnnError> {
    cfg.validate(index.len())?;
    let nn = index.nearest(query, cfg.k, cfg.p, cfg.attribute)?;
    Ok(GroupScore::from_neighbors(&nn))
}

/// Annotate many queries; results are in query order.
pub fn knn_annotate_batch(
    queries: &[&[f32]],
    index: &KnnIndex,
    cfg: &KnnConfig,
    exec: &Exec,
) -> Result<Vec<GroupScore>, KnnError> {
    cfg.validate(index.len())?;
    exec.map(queries, |q| knn_annotate(q, index, cfg)).into_iter().collect()
}
