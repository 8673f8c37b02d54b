use std::collections::BTreeSet;
use std::path::Path;

use regex::{Regex, RegexSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("pattern {label:?} in set {set:?} does not compile: {message}")]
    Compile { set: String, label: String, message: String },
    #[error("duplicate label {label:?} in set {set:?}")]
    DuplicateLabel { set: String, label: String },
    #[error("bad pattern config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternEntry {
    pub label: String,
    pub regex: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub excluded_from_reports: bool,
}

/// On-disk pattern configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternConfig {
    pub name: String,
    pub patterns: Vec<PatternEntry>,
    /// Wrap every pattern in `\b(?:...)\b`.
    #[serde(default = "yes")]
    pub word_boundaries: bool,
    /// Lowercase text before matching.
    #[serde(default = "yes")]
    pub lowercase: bool,
}

fn yes() -> bool {
    true
}

/// A compiled, immutable set of labelled patterns.
#[derive(Debug, Clone)]
pub struct PatternSet {
    name: String,
    entries: Vec<PatternEntry>,
    set: RegexSet,
    lowercase: bool,
}

pub const IDENTITY_JSON: &str = include_str!("../../data/identity_keywords.json");
pub const GENDER_JSON: &str = include_str!("../../data/gender_keywords.json");

impl PatternSet {
    pub fn from_config(config: PatternConfig) -> Result<Self, PatternError> {
        let mut seen = BTreeSet::new();
        let mut sources = Vec::with_capacity(config.patterns.len());
        for e in &config.patterns {
            if !seen.insert(e.label.clone()) {
                return Err(PatternError::DuplicateLabel { set: config.name.clone(), label: e.label.clone() });
            }
            let src = if config.word_boundaries { format!(r"\b(?:{})\b", e.regex) } else { e.regex.clone() };
            Regex::new(&src).map_err(|err| PatternError::Compile {
                set: config.name.clone(),
                label: e.label.clone(),
                message: err.to_string(),
            })?;
            sources.push(src);
        }
        let set = RegexSet::new(&sources).map_err(|err| PatternError::Compile {
            set: config.name.clone(),
            label: "*".into(),
            message: err.to_string(),
        })?;
        Ok(PatternSet { name: config.name, entries: config.patterns, set, lowercase: config.lowercase })
    }

    pub fn from_json(json: &str) -> Result<Self, PatternError> {
        let cfg: PatternConfig = serde_json::from_str(json).map_err(|e| PatternError::Config(e.to_string()))?;
        PatternSet::from_config(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PatternError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| PatternError::Io { path: path.display().to_string(), source })?;
        PatternSet::from_json(&text)
    }

    /// The identity keyword list inherited from the C4 blocklist audit.
    pub fn identity() -> Self {
        PatternSet::from_json(IDENTITY_JSON).expect("bundled identity patterns compile")
    }

    /// Woman- and man-related keywords (groups `woman` and `man`).
    pub fn gender() -> Self {
        PatternSet::from_json(GENDER_JSON).expect("bundled gender patterns compile")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn entries(&self) -> &[PatternEntry] {
        &self.entries
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.label.as_str())
    }

    pub fn is_excluded(&self, label: &str) -> bool {
        self.entries.iter().any(|e| e.label == label && e.excluded_from_reports)
    }

    pub fn group_of(&self, label: &str) -> Option<&str> {
        self.entries.iter().find(|e| e.label == label).and_then(|e| e.group.as_deref())
    }

    /// A new set containing only the entries of one group.
    pub fn subset(&self, group: &str, name: &str, keep_excluded: bool) -> Result<Self, PatternError> {
        let patterns = self
            .entries
            .iter()
            .filter(|e| e.group.as_deref() == Some(group) && (keep_excluded || !e.excluded_from_reports))
            .cloned()
            .collect();
        PatternSet::from_config(PatternConfig {
            name: name.to_string(),
            patterns,
            word_boundaries: true,
            lowercase: self.lowercase,
        })
    }

    /// Labels whose pattern matches `text` (presence, not occurrence count).
    pub fn matches(&self, text: &str) -> BTreeSet<String> {
        let matched = if self.lowercase {
            self.set.matches(&text.to_lowercase())
        } else {
            self.set.matches(text)
        };
        matched.iter().map(|i| self.entries[i].label.clone()).collect()
    }
}

pub fn match_patterns(text: &str, set: &PatternSet) -> BTreeSet<String> {
    set.matches(text)
}
