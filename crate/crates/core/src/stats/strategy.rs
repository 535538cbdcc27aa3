//! Free-text strategy canonicalization and frequency filtering.

use std::collections::{BTreeMap, BTreeSet};

use super::StatsError;

pub const BUNDLED_STRATEGY_MAP: &str = include_str!("../../data/strategies.tsv");

/// Label for strategies no phrase matches.
pub const OTHER_STRATEGY: &str = "other";

/// Ordered `phrase -> category` substring rules; the first match wins.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyMap {
    rules: Vec<(String, String)>,
}

impl StrategyMap {
    /// Parses `phrase<TAB>category` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, StatsError> {
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let mut parts = raw.split('\t');
            let (Some(phrase), Some(category), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(StatsError::MapParse {
                    line: i + 1,
                    message: "expected phrase<TAB>category".into(),
                });
            };
            let (phrase, category) = (phrase.trim().to_lowercase(), category.trim().to_lowercase());
            if phrase.is_empty() || category.is_empty() {
                return Err(StatsError::MapParse {
                    line: i + 1,
                    message: "empty phrase or category".into(),
                });
            }
            rules.push((phrase, category));
        }
        Ok(StrategyMap { rules })
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_STRATEGY_MAP).expect("bundled strategy map parses")
    }

    /// Every category the map can produce, plus `other`.
    pub fn categories(&self) -> BTreeSet<String> {
        self.rules
            .iter()
            .map(|(_, c)| c.clone())
            .chain(std::iter::once(OTHER_STRATEGY.to_string()))
            .collect()
    }

    pub fn canonicalize(&self, free_text: &str) -> String {
        let lower = free_text.to_lowercase();
        self.rules
            .iter()
            .find(|(phrase, _)| lower.contains(phrase.as_str()))
            .map_or_else(|| OTHER_STRATEGY.to_string(), |(_, c)| c.clone())
    }
}

/// Categories occurring strictly more than `min_count` times.
pub fn frequency_filter<'a>(labels: impl IntoIterator<Item = &'a str>, min_count: usize) -> BTreeSet<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .filter(|(_, c)| *c > min_count)
        .map(|(l, _)| l.to_string())
        .collect()
}
