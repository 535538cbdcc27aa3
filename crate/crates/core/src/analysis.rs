//! Corpus-level analyses: strategy regressions, trait-by-strategy dependence
//! and price-versus-length summaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agents::Role;
use crate::dialogue::DialogueRecord;
use crate::metrics::MetricsRow;
use crate::personality::{Dimension, Polarity};
use crate::stats::{
    chi_square, frequency_filter, ols_regress, pearson_test, ChiSquareResult, ContingencyTable, RankCorrelation,
    RegressionResult, StatsError, StrategyMap,
};

/// Default minimum count a strategy category must exceed to be analyzed.
pub const DEFAULT_MIN_STRATEGY_COUNT: usize = 20;

/// Canonical strategy labels for every turn of `role` that declared one.
pub fn canonical_strategies(record: &DialogueRecord, role: Role, map: &StrategyMap) -> Vec<String> {
    record
        .strategies(role)
        .into_iter()
        .map(|s| map.canonicalize(s))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionTarget {
    /// Joint utility against strategies used by either side.
    Joint,
    /// A role's own utility against that role's strategies.
    Intrinsic(Role),
}

impl RegressionTarget {
    fn roles(self) -> &'static [Role] {
        match self {
            RegressionTarget::Joint => &[Role::Seller, Role::Buyer],
            RegressionTarget::Intrinsic(Role::Seller) => &[Role::Seller],
            RegressionTarget::Intrinsic(Role::Buyer) => &[Role::Buyer],
        }
    }

    fn outcome(self, row: &MetricsRow) -> Option<f64> {
        match self {
            RegressionTarget::Joint => row.joint_utility,
            RegressionTarget::Intrinsic(role) => row.intrinsic(role),
        }
    }

    pub fn label(self) -> String {
        match self {
            RegressionTarget::Joint => "joint_utility".into(),
            RegressionTarget::Intrinsic(role) => format!("{}_utility", role.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRegression {
    pub target: RegressionTarget,
    /// Occurrence counts of every category across the whole corpus.
    pub counts: BTreeMap<String, usize>,
    pub result: RegressionResult,
}

/// Regresses the target utility of successful dialogues on indicators of
/// whether each frequent strategy category was used in the dialogue.
/// Frequency counts run over every dialogue; rows are deals only.
pub fn strategy_regression(
    records: &[DialogueRecord],
    rows: &[MetricsRow],
    map: &StrategyMap,
    target: RegressionTarget,
    min_count: usize,
    exclude_out_of_range: bool,
) -> Result<StrategyRegression, StatsError> {
    if records.len() != rows.len() {
        return Err(StatsError::LengthMismatch(records.len(), rows.len()));
    }
    let labels: Vec<Vec<String>> = records
        .iter()
        .map(|r| target.roles().iter().flat_map(|role| canonical_strategies(r, *role, map)).collect())
        .collect();
    let counts = count_labels(labels.iter().flatten());
    let retained: Vec<String> = frequency_filter(labels.iter().flatten().map(String::as_str), min_count)
        .into_iter()
        .collect();

    let mut design = Vec::new();
    let mut outcome = Vec::new();
    for (used, row) in labels.iter().zip(rows) {
        let Some(y) = target.outcome(row) else { continue };
        if exclude_out_of_range && row.out_of_range {
            continue;
        }
        design.push(
            retained
                .iter()
                .map(|c| if used.contains(c) { 1.0 } else { 0.0 })
                .collect(),
        );
        outcome.push(y);
    }
    let result = ols_regress(&retained, &design, &outcome)?;
    Ok(StrategyRegression { target, counts, result })
}

fn count_labels<'a>(labels: impl Iterator<Item = &'a String>) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for l in labels {
        *counts.entry(l.clone()).or_insert(0) += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitStrategyDependence {
    pub role: Role,
    pub dimension: Dimension,
    pub table: ContingencyTable,
    pub result: Option<ChiSquareResult>,
    /// Set when the test could not be computed, e.g. an empty polarity column.
    pub error: Option<String>,
}

/// Counts each frequent strategy of `role` against the polarity of the same
/// role's trait in `dimension`, then tests the table for dependence.
pub fn trait_strategy_dependence(
    records: &[DialogueRecord],
    map: &StrategyMap,
    role: Role,
    dimension: Dimension,
    min_count: usize,
) -> Result<TraitStrategyDependence, StatsError> {
    let per_dialogue: Vec<(Polarity, Vec<String>)> = records
        .iter()
        .map(|r| (r.profile(role).level(dimension).polarity, canonical_strategies(r, role, map)))
        .collect();
    let retained: Vec<String> =
        frequency_filter(per_dialogue.iter().flat_map(|(_, l)| l.iter().map(String::as_str)), min_count)
            .into_iter()
            .collect();
    let mut counts = vec![vec![0u64; 2]; retained.len()];
    for (polarity, labels) in &per_dialogue {
        let col = match polarity {
            Polarity::Negative => 0,
            Polarity::Positive => 1,
        };
        for l in labels {
            if let Ok(i) = retained.binary_search(l) {
                counts[i][col] += 1;
            }
        }
    }
    let cols = vec![format!("{}-", dimension.code()), format!("{}+", dimension.code())];
    let table = ContingencyTable::new(retained, cols, counts)?;
    let (result, error) = match chi_square(&table) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(TraitStrategyDependence {
        role,
        dimension,
        table,
        result,
        error,
    })
}

/// Every role and dimension combination; tables that cannot be formed
/// (fewer than two frequent strategies) are skipped.
pub fn dependence_grid(records: &[DialogueRecord], map: &StrategyMap, min_count: usize) -> Vec<TraitStrategyDependence> {
    let mut out = Vec::new();
    for role in [Role::Seller, Role::Buyer] {
        for d in Dimension::ALL {
            if let Ok(dep) = trait_strategy_dependence(records, map, role, d, min_count) {
                out.push(dep);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryAggregate {
    pub category: String,
    pub dialogues: usize,
    pub mean_price: f64,
    pub mean_log_price: f64,
    pub mean_rounds: f64,
    pub mean_word_count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceLengthReport {
    pub categories: Vec<CategoryAggregate>,
    pub price_vs_rounds: Option<RankCorrelation>,
    pub log_price_vs_rounds: Option<RankCorrelation>,
    pub price_vs_words: Option<RankCorrelation>,
    pub log_price_vs_words: Option<RankCorrelation>,
}

/// Pearson correlations between the listing price and dialogue length over
/// every dialogue, plus per-category means. Lengths are utterance counts and
/// whitespace-delimited word counts.
pub fn price_length_report(rows: &[MetricsRow]) -> Result<PriceLengthReport, StatsError> {
    if rows.is_empty() {
        return Err(StatsError::TooFewObservations { needed: 1, got: 0 });
    }
    let price: Vec<f64> = rows.iter().map(|r| r.seller_ideal).collect();
    if price.iter().any(|p| !p.is_finite() || *p <= 0.0) {
        return Err(StatsError::NonFinite);
    }
    let log_price: Vec<f64> = price.iter().map(|p| p.ln()).collect();
    let rounds: Vec<f64> = rows.iter().map(|r| r.rounds as f64).collect();
    let words: Vec<f64> = rows.iter().map(|r| r.word_count as f64).collect();

    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        let name = r.category.map_or("uncategorized", |c| c.name());
        groups.entry(name.to_string()).or_default().push(i);
    }
    let mean = |v: &[f64], idx: &[usize]| idx.iter().map(|&i| v[i]).sum::<f64>() / idx.len() as f64;
    let categories = groups
        .iter()
        .map(|(name, idx)| CategoryAggregate {
            category: name.clone(),
            dialogues: idx.len(),
            mean_price: mean(&price, idx),
            mean_log_price: mean(&log_price, idx),
            mean_rounds: mean(&rounds, idx),
            mean_word_count: mean(&words, idx),
        })
        .collect();
    Ok(PriceLengthReport {
        categories,
        price_vs_rounds: pearson_test(&price, &rounds).ok(),
        log_price_vs_rounds: pearson_test(&log_price, &rounds).ok(),
        price_vs_words: pearson_test(&price, &words).ok(),
        log_price_vs_words: pearson_test(&log_price, &words).ok(),
    })
}
