//! Keyword annotation of alt-text, keyword intersections and gendered
//! common-word pass-rate gaps.

mod intersect;
mod patterns;
mod words;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use intersect::{intersect_groups, IntersectionCell, IntersectionTable, IntersectionTally, TOTAL};
pub use patterns::{match_patterns, PatternConfig, PatternEntry, PatternError, PatternSet, GENDER_JSON, IDENTITY_JSON};
pub use words::{bundled_stopwords, common_word_gap, tokenize, WordGapTally, WordGapTables, WordStatsRow, STOPWORDS_TXT};

/// Keyword hits of one sample, per pattern-set name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordAnnotation {
    pub uid: String,
    pub hits: BTreeMap<String, BTreeSet<String>>,
}

pub fn annotate_keywords(uid: &str, text: &str, sets: &[&PatternSet]) -> KeywordAnnotation {
    KeywordAnnotation {
        uid: uid.to_string(),
        hits: sets.iter().map(|s| (s.name().to_string(), s.matches(text))).collect(),
    }
}
