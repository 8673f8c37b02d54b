use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::PatternSet;

/// Stop words shipped with the `word_cloud` Python package (v1.9), one per line.
pub const STOPWORDS_TXT: &str = include_str!("../../data/stopwords.txt");

pub fn bundled_stopwords() -> HashSet<String> {
    STOPWORDS_TXT.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect()
}

/// Lowercase, split on anything that is not alphanumeric, dedupe.
pub fn tokenize(text: &str) -> BTreeSet<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct WordCounts {
    n_any: u64,
    n_a: u64,
    pass_a: u64,
    n_b: u64,
    pass_b: u64,
}

/// Per-word counts over samples that mention either gender side.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordGapTally {
    words: HashMap<String, WordCounts>,
    samples: u64,
}

impl WordGapTally {
    pub fn add(&mut self, text: &str, in_a: bool, in_b: bool, passed: bool, stopwords: &HashSet<String>) {
        if !in_a && !in_b {
            return;
        }
        self.samples += 1;
        for w in tokenize(text) {
            if stopwords.contains(&w) {
                continue;
            }
            let c = self.words.entry(w).or_default();
            c.n_any += 1;
            if in_a {
                c.n_a += 1;
                c.pass_a += passed as u64;
            }
            if in_b {
                c.n_b += 1;
                c.pass_b += passed as u64;
            }
        }
    }

    pub fn merge(mut self, other: WordGapTally) -> Self {
        self.samples += other.samples;
        for (w, o) in other.words {
            let c = self.words.entry(w).or_default();
            c.n_any += o.n_any;
            c.n_a += o.n_a;
            c.pass_a += o.pass_a;
            c.n_b += o.n_b;
            c.pass_b += o.pass_b;
        }
        self
    }

    /// Qualifying samples seen (those hitting either side).
    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn finish(&self, min_count: u64, top_k: usize) -> WordGapTables {
        assert!(min_count >= 1, "min_count must be at least 1");
        let mut rows: Vec<WordStatsRow> = self
            .words
            .iter()
            .filter(|(_, c)| c.n_any >= min_count)
            .map(|(w, c)| WordStatsRow::new(w, c))
            .collect();
        rows.sort_by(|a, b| a.word.cmp(&b.word));

        let mut side_a: Vec<WordStatsRow> = rows.iter().filter(|r| r.gap.is_some_and(|g| g > 0.0)).cloned().collect();
        side_a.sort_by(|x, y| y.gap.unwrap().total_cmp(&x.gap.unwrap()).then_with(|| x.word.cmp(&y.word)));
        side_a.truncate(top_k);

        let mut side_b: Vec<WordStatsRow> = rows.iter().filter(|r| r.gap.is_some_and(|g| g < 0.0)).cloned().collect();
        side_b.sort_by(|x, y| x.gap.unwrap().total_cmp(&y.gap.unwrap()).then_with(|| x.word.cmp(&y.word)));
        side_b.truncate(top_k);

        WordGapTables { rows, side_a, side_b }
    }
}

/// One word's gendered pass rates. `gap = rate_a - rate_b`, undefined when
/// either side never co-occurs with the word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordStatsRow {
    pub word: String,
    pub n_a: u64,
    pub pass_a: u64,
    pub n_b: u64,
    pub pass_b: u64,
    pub gap: Option<f64>,
}

impl WordStatsRow {
    fn new(word: &str, c: &WordCounts) -> Self {
        let rate = |p: u64, n: u64| (n > 0).then(|| p as f64 / n as f64);
        let gap = match (rate(c.pass_a, c.n_a), rate(c.pass_b, c.n_b)) {
            (Some(a), Some(b)) => Some(a - b),
            _ => None,
        };
        WordStatsRow { word: word.to_string(), n_a: c.n_a, pass_a: c.pass_a, n_b: c.n_b, pass_b: c.pass_b, gap }
    }

    pub fn rate_a(&self) -> Option<f64> {
        (self.n_a > 0).then(|| self.pass_a as f64 / self.n_a as f64)
    }

    pub fn rate_b(&self) -> Option<f64> {
        (self.n_b > 0).then(|| self.pass_b as f64 / self.n_b as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordGapTables {
    /// Every word with enough support, sorted by word.
    pub rows: Vec<WordStatsRow>,
    /// Largest positive gaps (side A passes more often).
    pub side_a: Vec<WordStatsRow>,
    /// Largest negative gaps (side B passes more often).
    pub side_b: Vec<WordStatsRow>,
}

/// Rank common words by the pass-rate gap between samples mentioning group
/// `side_a` keywords and samples mentioning group `side_b` keywords.
#[allow(clippy::too_many_arguments)]
pub fn common_word_gap<'a, I>(
    samples: I,
    gender_set: &PatternSet,
    side_a: &str,
    side_b: &str,
    stopwords: &HashSet<String>,
    min_count: u64,
    top_k: usize,
) -> WordGapTables
where
    I: IntoIterator<Item = (&'a str, bool)>,
{
    let mut tally = WordGapTally::default();
    for (text, passed) in samples {
        let hits = gender_set.matches(text);
        let in_side = |side: &str| hits.iter().any(|l| gender_set.group_of(l) == Some(side));
        tally.add(text, in_side(side_a), in_side(side_b), passed, stopwords);
    }
    tally.finish(min_count, top_k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> Vec<(String, bool)> {
        let mut v = Vec::new();
        // "queen": 10 woman samples (5 pass), 10 man samples (3 pass).
        v.extend((0..10).map(|i| ("the queen and the woman".to_string(), i < 5)));
        v.extend((0..10).map(|i| ("the queen and the man".to_string(), i < 3)));
        // "career": man side higher.
        v.extend((0..10).map(|i| ("career woman".to_string(), i < 2)));
        v.extend((0..10).map(|i| ("career man".to_string(), i < 7)));
        // "lipstick": woman only.
        v.extend((0..12).map(|i| ("lipstick for her".to_string(), i < 6)));
        // no gender keyword: ignored entirely.
        v.extend((0..50).map(|_| ("queen size bed".to_string(), true)));
        v
    }

    fn run(a: &str, b: &str) -> WordGapTables {
        let data = fixture();
        common_word_gap(
            data.iter().map(|(t, p)| (t.as_str(), *p)),
            &PatternSet::gender(),
            a,
            b,
            &bundled_stopwords(),
            10,
            20,
        )
    }

    /// Exhaustive count oracle over the fixture.
    fn oracle_rates(word: &str, side_kw: &str) -> (u64, u64) {
        let mut n = 0;
        let mut p = 0;
        for (t, passed) in fixture() {
            let toks = tokenize(&t);
            if toks.contains(word) && toks.contains(side_kw) {
                n += 1;
                p += passed as u64;
            }
        }
        (n, p)
    }

    #[test]
    fn queen_gap_is_plus_point_two() {
        let t = run("woman", "man");
        let q = t.rows.iter().find(|r| r.word == "queen").unwrap();
        assert_eq!((q.n_a, q.pass_a), oracle_rates("queen", "woman"));
        assert_eq!((q.n_b, q.pass_b), oracle_rates("queen", "man"));
        assert!((q.gap.unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(t.side_a[0].word, "queen");
        assert_eq!(t.side_b[0].word, "career");
    }

    #[test]
    fn one_sided_word_has_undefined_gap() {
        let t = run("woman", "man");
        let l = t.rows.iter().find(|r| r.word == "lipstick").unwrap();
        assert_eq!(l.n_b, 0);
        assert_eq!(l.rate_b(), None);
        assert_eq!(l.gap, None);
        assert!(t.side_a.iter().chain(&t.side_b).all(|r| r.word != "lipstick"));
    }

    #[test]
    fn stopwords_are_dropped() {
        let t = run("woman", "man");
        assert!(bundled_stopwords().contains("the"));
        assert!(t.rows.iter().all(|r| r.word != "the" && r.word != "and"));
    }

    #[test]
    fn reversing_sides_negates_gaps() {
        let fwd = run("woman", "man");
        let rev = run("man", "woman");
        for r in &fwd.rows {
            let o = rev.rows.iter().find(|x| x.word == r.word).unwrap();
            match (r.gap, o.gap) {
                (Some(a), Some(b)) => assert!((a + b).abs() < 1e-12),
                (None, None) => {}
                other => panic!("asymmetric definedness {other:?}"),
            }
        }
        assert_eq!(fwd.side_a[0].word, rev.side_b[0].word);
    }

    #[test]
    fn tokenizer_splits_on_punctuation() {
        let t: Vec<String> = tokenize("Queen's Day\u{2014}2024!").into_iter().collect();
        assert_eq!(t, vec!["2024", "day", "queen", "s"]);
    }
}
