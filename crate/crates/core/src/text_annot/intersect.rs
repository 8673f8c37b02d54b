use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::PatternSet;
use crate::stats::GroupCount;

/// Margin label: the pass rate of a single label regardless of the other dimension.
pub const TOTAL: &str = "total";

/// Partial state for an intersection heat map. Merges by addition.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IntersectionTally {
    cells: BTreeMap<(String, String), GroupCount>,
}

impl IntersectionTally {
    /// Count one sample with its hits in both dimensions.
    pub fn add(&mut self, hits_a: &BTreeSet<String>, hits_b: &BTreeSet<String>, passed: bool) {
        for a in hits_a {
            self.bump(a, TOTAL, passed);
            for b in hits_b {
                self.bump(a, b, passed);
            }
        }
        for b in hits_b {
            self.bump(TOTAL, b, passed);
        }
    }

    fn bump(&mut self, a: &str, b: &str, passed: bool) {
        self.cells.entry((a.to_string(), b.to_string())).or_default().record(passed);
    }

    pub fn merge(mut self, other: IntersectionTally) -> Self {
        for (k, v) in other.cells {
            let e = self.cells.entry(k).or_default();
            *e = e.merge(v);
        }
        self
    }

    pub fn get(&self, a: &str, b: &str) -> GroupCount {
        self.cells.get(&(a.to_string(), b.to_string())).copied().unwrap_or_default()
    }

    /// Lay out the full grid over both label vocabularies plus margins.
    pub fn finish(&self, labels_a: &[String], labels_b: &[String], min_support: u64) -> IntersectionTable {
        let mut cells = Vec::new();
        let rows = labels_a.iter().map(String::as_str).chain(std::iter::once(TOTAL));
        for a in rows {
            let cols = labels_b.iter().map(String::as_str).chain(std::iter::once(TOTAL));
            for b in cols {
                if a == TOTAL && b == TOTAL {
                    continue;
                }
                let count = self.get(a, b);
                cells.push(IntersectionCell {
                    a: a.to_string(),
                    b: b.to_string(),
                    count,
                    suppressed: count.raw < min_support,
                });
            }
        }
        IntersectionTable { min_support, cells }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntersectionCell {
    pub a: String,
    pub b: String,
    pub count: GroupCount,
    pub suppressed: bool,
}

impl IntersectionCell {
    /// Pass rate, or `None` when suppressed or empty.
    pub fn pass_rate(&self) -> Option<f64> {
        if self.suppressed {
            None
        } else {
            self.count.pass_rate()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntersectionTable {
    pub min_support: u64,
    pub cells: Vec<IntersectionCell>,
}

impl IntersectionTable {
    pub fn cell(&self, a: &str, b: &str) -> Option<&IntersectionCell> {
        self.cells.iter().find(|c| c.a == a && c.b == b)
    }

    pub fn suppressed_count(&self) -> usize {
        self.cells.iter().filter(|c| c.suppressed).count()
    }
}

/// Pass rates over every pair of labels from two pattern sets.
///
/// Cells with fewer than `min_support` raw samples are marked suppressed.
pub fn intersect_groups<'a, I>(texts: I, dims: (&PatternSet, &PatternSet), min_support: u64) -> IntersectionTable
where
    I: IntoIterator<Item = (&'a str, bool)>,
{
    assert!(min_support >= 1, "min_support must be at least 1");
    let mut tally = IntersectionTally::default();
    for (text, passed) in texts {
        tally.add(&dims.0.matches(text), &dims.1.matches(text), passed);
    }
    let la: Vec<String> = dims.0.labels().map(String::from).collect();
    let lb: Vec<String> = dims.1.labels().map(String::from).collect();
    tally.finish(&la, &lb, min_support)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sets() -> (PatternSet, PatternSet) {
        let id = PatternSet::identity();
        (
            id.subset("race", "race", false).unwrap(),
            id.subset("gender", "gender", false).unwrap(),
        )
    }

    #[test]
    fn asian_woman_and_man_cells() {
        let (race, gender) = sets();
        let mut texts: Vec<(&str, bool)> = Vec::new();
        texts.extend((0..10).map(|i| ("asian woman portrait", i < 6)));
        texts.extend((0..25).map(|i| ("asian man portrait", i < 12)));
        texts.extend((0..9).map(|_| ("latina woman", true)));
        let t = intersect_groups(texts, (&race, &gender), 10);
        let aw = t.cell("asian([ -]american)?s?", "wom[ae]n").unwrap();
        assert_eq!(aw.count, GroupCount::new(10, 6));
        assert_eq!(aw.pass_rate(), Some(0.60));
        let am = t.cell("asian([ -]american)?s?", "m[ae]n").unwrap();
        assert_eq!(am.pass_rate(), Some(0.48));
        assert!(aw.pass_rate() > am.pass_rate());
        let lw = t.cell("latin[oax]s?", "wom[ae]n").unwrap();
        assert_eq!(lw.count.raw, 9);
        assert!(lw.suppressed);
        assert_eq!(lw.pass_rate(), None);
        // Margin: every woman mention regardless of race.
        let margin = t.cell(TOTAL, "wom[ae]n").unwrap();
        assert_eq!(margin.count, GroupCount::new(19, 15));
    }

    #[test]
    fn margins_bound_cells() {
        let (race, gender) = sets();
        let texts = vec![
            ("asian european woman man", true),
            ("asian woman", false),
            ("european man", true),
            ("latino men", false),
        ];
        let t = intersect_groups(texts, (&race, &gender), 1);
        for c in &t.cells {
            if c.a != TOTAL && c.b != TOTAL {
                assert!(t.cell(&c.a, TOTAL).unwrap().count.raw >= c.count.raw);
                assert!(t.cell(TOTAL, &c.b).unwrap().count.raw >= c.count.raw);
            }
        }
    }

    #[test]
    fn merge_equals_single_pass() {
        let (race, gender) = sets();
        let data = [("asian woman", true), ("asian man", false), ("european woman", true)];
        let mut whole = IntersectionTally::default();
        let mut a = IntersectionTally::default();
        let mut b = IntersectionTally::default();
        for (i, (t, p)) in data.iter().enumerate() {
            whole.add(&race.matches(t), &gender.matches(t), *p);
            let part = if i % 2 == 0 { &mut a } else { &mut b };
            part.add(&race.matches(t), &gender.matches(t), *p);
        }
        assert_eq!(b.merge(a), whole);
    }
}
