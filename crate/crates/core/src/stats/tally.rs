use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Raw and passed counts for one group. `passed <= raw` always.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupCount {
    pub raw: u64,
    pub passed: u64,
}

impl GroupCount {
    pub fn new(raw: u64, passed: u64) -> Self {
        assert!(passed <= raw, "passed {passed} exceeds raw {raw}");
        GroupCount { raw, passed }
    }

    pub fn record(&mut self, passed: bool) {
        self.raw += 1;
        self.passed += passed as u64;
    }

    pub fn merge(self, other: GroupCount) -> GroupCount {
        GroupCount { raw: self.raw + other.raw, passed: self.passed + other.passed }
    }

    pub fn pass_rate(&self) -> Option<f64> {
        pass_rate(self)
    }
}

/// `passed / raw`, or `None` for an empty group.
pub fn pass_rate(g: &GroupCount) -> Option<f64> {
    (g.raw > 0).then(|| g.passed as f64 / g.raw as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub dimension: String,
    pub label: String,
}

impl GroupKey {
    pub fn new(dimension: impl Into<String>, label: impl Into<String>) -> Self {
        GroupKey { dimension: dimension.into(), label: label.into() }
    }
}

/// Per-group counts; the partial state each worker folds into.
///
/// Merging is exact integer addition, so it is commutative and associative.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    groups: BTreeMap<GroupKey, GroupCount>,
}

impl Tally {
    pub fn new() -> Self {
        Tally::default()
    }

    pub fn add(&mut self, dimension: &str, label: &str, passed: bool) {
        let key = GroupKey::new(dimension, label);
        self.groups.entry(key).or_default().record(passed);
    }

    pub fn add_count(&mut self, key: GroupKey, count: GroupCount) {
        let e = self.groups.entry(key).or_default();
        *e = e.merge(count);
    }

    pub fn merge(mut self, other: Tally) -> Tally {
        if self.groups.len() < other.groups.len() {
            return other.merge(self);
        }
        for (k, v) in other.groups {
            self.add_count(k, v);
        }
        self
    }

    pub fn get(&self, dimension: &str, label: &str) -> GroupCount {
        self.groups.get(&GroupKey::new(dimension, label)).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GroupKey, &GroupCount)> {
        self.groups.iter()
    }

    pub fn dimension(&self, dimension: &str) -> impl Iterator<Item = (&str, GroupCount)> + '_ {
        let dim = dimension.to_string();
        self.groups
            .iter()
            .filter(move |(k, _)| k.dimension == dim)
            .map(|(k, v)| (k.label.as_str(), *v))
    }

    /// Sum over every label of one dimension.
    pub fn dimension_total(&self, dimension: &str) -> GroupCount {
        self.dimension(dimension).fold(GroupCount::default(), |a, (_, c)| a.merge(c))
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}
