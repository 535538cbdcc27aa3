//! Rank correlations between trait levels and negotiation metrics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::correlation::spearman;
use super::StatsError;
use crate::agents::Role;
use crate::metrics::MetricsRow;
use crate::personality::{Dimension, OrdinalEncoding, PersonalityProfile};

/// Significance cutoffs for one and two stars in the metric grid.
pub const GRID_STAR_LEVELS: [f64; 2] = [0.1, 0.05];

/// One star per cutoff that `p` falls strictly below.
pub fn stars(p: f64, levels: &[f64]) -> String {
    "*".repeat(levels.iter().filter(|&&l| p < l).count())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    IntrinsicUtility,
    JointUtility,
    ConcessionRate,
    SuccessRate,
    NegotiationRounds,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::IntrinsicUtility,
        Metric::JointUtility,
        Metric::ConcessionRate,
        Metric::SuccessRate,
        Metric::NegotiationRounds,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Metric::IntrinsicUtility => "Intrinsic Utility",
            Metric::JointUtility => "Joint Utility",
            Metric::ConcessionRate => "Concession Rate",
            Metric::SuccessRate => "Success Rate",
            Metric::NegotiationRounds => "Negotiation Rounds",
        }
    }

    /// Value of this metric for `role`, or `None` when the dialogue does not
    /// contribute. Success rate counts every dialogue; the rest only deals.
    fn value(self, row: &MetricsRow, role: Role, exclude_out_of_range: bool) -> Option<f64> {
        if self == Metric::SuccessRate {
            return Some(if row.success { 1.0 } else { 0.0 });
        }
        if !row.success || (exclude_out_of_range && row.out_of_range && self.is_utility()) {
            return None;
        }
        match self {
            Metric::IntrinsicUtility => row.intrinsic(role),
            Metric::JointUtility => row.joint_utility,
            Metric::ConcessionRate => row.concession(role),
            Metric::NegotiationRounds => Some(row.rounds as f64),
            Metric::SuccessRate => unreachable!(),
        }
    }

    fn is_utility(self) -> bool {
        matches!(self, Metric::IntrinsicUtility | Metric::JointUtility)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TraitObservation<'a> {
    pub row: &'a MetricsRow,
    pub seller: &'a PersonalityProfile,
    pub buyer: &'a PersonalityProfile,
}

impl TraitObservation<'_> {
    fn profile(&self, role: Role) -> &PersonalityProfile {
        match role {
            Role::Seller => self.seller,
            Role::Buyer => self.buyer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    pub encoding: OrdinalEncoding,
    /// Drop deals whose utilities fall outside [0, 1] from the utility cells.
    pub exclude_out_of_range: bool,
    pub min_dialogues: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            encoding: OrdinalEncoding::default(),
            exclude_out_of_range: false,
            min_dialogues: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub metric: Metric,
    pub role: Role,
    pub dimension: Dimension,
    pub n: usize,
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
    pub stars: String,
    /// Why the cell is empty, when it is.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitMetricGrid {
    pub dialogues: usize,
    pub cells: Vec<GridCell>,
}

impl TraitMetricGrid {
    pub fn cell(&self, metric: Metric, role: Role, dimension: Dimension) -> Option<&GridCell> {
        self.cells
            .iter()
            .find(|c| c.metric == metric && c.role == role && c.dimension == dimension)
    }

    /// Roles by dimension down the side, metrics across the top.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Role | Trait |");
        for m in Metric::ALL {
            let _ = write!(out, " {} |", m.label());
        }
        out.push_str("\n|---|---|");
        out.push_str(&"---:|".repeat(Metric::ALL.len()));
        out.push('\n');
        for role in [Role::Seller, Role::Buyer] {
            for d in Dimension::ALL {
                let _ = write!(out, "| {} | {} |", role.name(), d.code());
                for m in Metric::ALL {
                    match self.cell(m, role, d).and_then(|c| c.rho.map(|r| (r, &c.stars))) {
                        Some((rho, s)) => {
                            let _ = write!(out, " {rho:.3}{s} |");
                        }
                        None => out.push_str(" n/a |"),
                    }
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,role,dimension,n,rho,p_value,stars\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                serde_json::to_value(c.metric).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                c.role.name(),
                c.dimension.code(),
                c.n,
                c.rho.map(|v| format!("{v:.6}")).unwrap_or_default(),
                c.p_value.map(|v| format!("{v:.6}")).unwrap_or_default(),
                c.stars
            );
        }
        out
    }
}

/// Spearman correlation of every (metric, role, dimension) combination
/// between the role's ordinal trait level and the metric.
pub fn trait_metric_table(
    observations: &[TraitObservation<'_>],
    options: &GridOptions,
) -> Result<TraitMetricGrid, StatsError> {
    if observations.len() < options.min_dialogues {
        return Err(StatsError::TooFewObservations {
            needed: options.min_dialogues,
            got: observations.len(),
        });
    }
    let mut cells = Vec::with_capacity(Metric::ALL.len() * 2 * Dimension::ALL.len());
    for metric in Metric::ALL {
        for role in [Role::Seller, Role::Buyer] {
            for dimension in Dimension::ALL {
                let (traits, values): (Vec<f64>, Vec<f64>) = observations
                    .iter()
                    .filter_map(|o| {
                        let v = metric.value(o.row, role, options.exclude_out_of_range)?;
                        Some((options.encoding.encode(o.profile(role).level(dimension)), v))
                    })
                    .unzip();
                let mut cell = GridCell {
                    metric,
                    role,
                    dimension,
                    n: values.len(),
                    rho: None,
                    p_value: None,
                    stars: String::new(),
                    note: None,
                };
                match spearman(&traits, &values) {
                    Ok(r) => {
                        cell.rho = Some(r.rho);
                        cell.p_value = Some(r.p_value);
                        cell.stars = stars(r.p_value, &GRID_STAR_LEVELS);
                    }
                    Err(e) => cell.note = Some(e.to_string()),
                }
                cells.push(cell);
            }
        }
    }
    Ok(TraitMetricGrid {
        dialogues: observations.len(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::personality::TraitLevel;

    fn row(success: bool, value: f64) -> MetricsRow {
        MetricsRow {
            dialogue_id: String::new(),
            category: None,
            success,
            failure_reason: None,
            rounds: 4,
            deal_price: success.then_some(1.0),
            seller_utility: success.then_some(value),
            buyer_utility: success.then_some(1.0 - value),
            joint_utility: success.then_some(value * (1.0 - value)),
            seller_concession: success.then_some(value),
            buyer_concession: success.then_some(-value),
            seller_offers: 1,
            buyer_offers: 1,
            out_of_range: false,
            seller_ideal: 1.0,
            word_count: 10,
        }
    }

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(0.06, &GRID_STAR_LEVELS), "*");
        assert_eq!(stars(0.04, &GRID_STAR_LEVELS), "**");
        assert_eq!(stars(0.1, &GRID_STAR_LEVELS), "");
        assert_eq!(stars(0.05, &GRID_STAR_LEVELS), "*");
    }

    #[test]
    fn metric_equal_to_trait_gives_unit_rho() {
        let levels = TraitLevel::ALL;
        let enc = OrdinalEncoding::default();
        let profiles: Vec<PersonalityProfile> = (0..12).map(|i| PersonalityProfile::uniform(levels[i % 6])).collect();
        let rows: Vec<MetricsRow> = profiles.iter().map(|p| row(true, enc.encode(p.level(Dimension::Agr)))).collect();
        let obs: Vec<TraitObservation> = rows
            .iter()
            .zip(&profiles)
            .map(|(r, p)| TraitObservation { row: r, seller: p, buyer: p })
            .collect();
        let grid = trait_metric_table(&obs, &GridOptions::default()).unwrap();
        for d in Dimension::ALL {
            let c = grid.cell(Metric::IntrinsicUtility, Role::Seller, d).unwrap();
            assert!((c.rho.unwrap() - 1.0).abs() < 1e-12);
            assert_eq!(c.stars, "**");
            let c = grid.cell(Metric::ConcessionRate, Role::Buyer, d).unwrap();
            assert!((c.rho.unwrap() + 1.0).abs() < 1e-12);
        }
        // every dialogue succeeded, so success rate is constant
        let c = grid.cell(Metric::SuccessRate, Role::Seller, Dimension::Ope).unwrap();
        assert!(c.rho.is_none() && c.note.is_some());
        assert_eq!(grid.cells.len(), 50);
        assert!(grid.to_markdown().contains("| seller | AGR |"));
        assert_eq!(grid.to_csv().lines().count(), 51);
    }

    #[test]
    fn too_few_dialogues() {
        let p = PersonalityProfile::uniform(TraitLevel::ALL[0]);
        let r = row(true, 0.5);
        let obs = vec![TraitObservation { row: &r, seller: &p, buyer: &p }; 9];
        assert_eq!(
            trait_metric_table(&obs, &GridOptions::default()).unwrap_err(),
            StatsError::TooFewObservations { needed: 10, got: 9 }
        );
    }
}
