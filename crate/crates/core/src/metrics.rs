//! Economic metrics of single dialogues and whole corpora.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::Role;
use crate::dialogue::{DialogueRecord, FailureReason, Outcome};
use crate::scenario::{Category, NegotiationScenario};

/// Default floor applied to concession-rate log arguments.
pub const DEFAULT_LOG_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("degenerate price interval for the {0}")]
    DegenerateInterval(&'static str),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("corpus has no successful negotiation")]
    NoSuccesses,
}

struct Prices {
    seller_ideal: f64,
    seller_reservation: f64,
    buyer_ideal: f64,
    buyer_reservation: f64,
}

impl Prices {
    fn of(s: &NegotiationScenario) -> Self {
        Prices {
            seller_ideal: s.seller_ideal.to_f64(),
            seller_reservation: s.seller_reservation.to_f64(),
            buyer_ideal: s.buyer_ideal.to_f64(),
            buyer_reservation: s.buyer_reservation.to_f64(),
        }
    }
}

/// Normalized gain of `role` at price `p`. Values outside `[0, 1]` are
/// returned as-is; see [`in_unit_range`].
pub fn intrinsic_utility(role: Role, p: f64, scenario: &NegotiationScenario) -> Result<f64, MetricsError> {
    let x = Prices::of(scenario);
    match role {
        Role::Seller => {
            let span = x.seller_ideal - x.seller_reservation;
            if span == 0.0 {
                return Err(MetricsError::DegenerateInterval("seller"));
            }
            Ok((p - x.seller_reservation) / span)
        }
        Role::Buyer => {
            let span = x.buyer_reservation - x.buyer_ideal;
            if span == 0.0 {
                return Err(MetricsError::DegenerateInterval("buyer"));
            }
            Ok((x.buyer_reservation - p) / span)
        }
    }
}

/// Product-form fairness of a deal price; peaks at 0.25 mid-zone.
pub fn joint_utility(p: f64, scenario: &NegotiationScenario) -> Result<f64, MetricsError> {
    let x = Prices::of(scenario);
    let width = x.buyer_reservation - x.seller_reservation;
    if width <= 0.0 {
        return Err(MetricsError::DegenerateInterval("agreement zone"));
    }
    Ok((p - x.seller_reservation) * (x.buyer_reservation - p) / (width * width))
}

pub fn in_unit_range(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

/// Scripted offer at round `t`: `reservation + (ideal - reservation) * ((T-t)/T)^c`.
/// Starts at the ideal price for `t = 0` and reaches the reservation at `t = T`
/// whenever `c > 0`.
pub fn scripted_price_path(reservation: f64, ideal: f64, exponent: f64, horizon: usize, t: usize) -> f64 {
    let remaining = (horizon as f64 - t as f64) / horizon as f64;
    reservation + (ideal - reservation) * remaining.powf(exponent)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcessionRate {
    pub value: f64,
    /// Number of offers summed over; zero means `value` is a placeholder.
    pub offers: usize,
}

impl ConcessionRate {
    pub fn is_empty(&self) -> bool {
        self.offers == 0
    }
}

/// Log-sum of how far each of the role's own offers moved from its ideal
/// toward its reservation. Ratios are floored at `log_floor` before the log.
pub fn concession_rate(
    role: Role,
    offers: &[(usize, f64)],
    scenario: &NegotiationScenario,
    log_floor: f64,
) -> Result<ConcessionRate, MetricsError> {
    let x = Prices::of(scenario);
    let (span, name) = match role {
        Role::Seller => (x.seller_ideal - x.seller_reservation, "seller"),
        Role::Buyer => (x.buyer_reservation - x.buyer_ideal, "buyer"),
    };
    if span == 0.0 {
        return Err(MetricsError::DegenerateInterval(name));
    }
    let value = offers
        .iter()
        .map(|&(_, p)| {
            let ratio = match role {
                Role::Seller => (x.seller_ideal - p) / span,
                Role::Buyer => (p - x.buyer_ideal) / span,
            };
            ratio.max(log_floor).ln()
        })
        .sum();
    Ok(ConcessionRate {
        value,
        offers: offers.len(),
    })
}

/// Per-dialogue measurements. Utility and concession columns are empty for
/// failed negotiations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub dialogue_id: String,
    pub category: Option<Category>,
    pub success: bool,
    pub failure_reason: Option<FailureReason>,
    pub rounds: usize,
    pub deal_price: Option<f64>,
    pub seller_utility: Option<f64>,
    pub buyer_utility: Option<f64>,
    pub joint_utility: Option<f64>,
    pub seller_concession: Option<f64>,
    pub buyer_concession: Option<f64>,
    pub seller_offers: usize,
    pub buyer_offers: usize,
    pub out_of_range: bool,
    pub seller_ideal: f64,
    pub word_count: usize,
}

impl MetricsRow {
    pub fn intrinsic(&self, role: Role) -> Option<f64> {
        match role {
            Role::Seller => self.seller_utility,
            Role::Buyer => self.buyer_utility,
        }
    }

    pub fn concession(&self, role: Role) -> Option<f64> {
        match role {
            Role::Seller => self.seller_concession,
            Role::Buyer => self.buyer_concession,
        }
    }
}

pub fn metrics_row(record: &DialogueRecord, log_floor: f64) -> Result<MetricsRow, MetricsError> {
    let s = &record.scenario;
    let seller_offers = record.offers(Role::Seller);
    let buyer_offers = record.offers(Role::Buyer);
    let mut row = MetricsRow {
        dialogue_id: record.id.clone(),
        category: s.category,
        success: record.outcome.is_success(),
        failure_reason: match &record.outcome {
            Outcome::Failure { reason, .. } => Some(*reason),
            Outcome::Success { .. } => None,
        },
        rounds: record.outcome.rounds(),
        deal_price: record.outcome.deal_price(),
        seller_utility: None,
        buyer_utility: None,
        joint_utility: None,
        seller_concession: None,
        buyer_concession: None,
        seller_offers: seller_offers.len(),
        buyer_offers: buyer_offers.len(),
        out_of_range: false,
        seller_ideal: s.seller_ideal.to_f64(),
        word_count: record.word_count(),
    };
    if let Some(p) = row.deal_price {
        let us = intrinsic_utility(Role::Seller, p, s)?;
        let ub = intrinsic_utility(Role::Buyer, p, s)?;
        let usb = joint_utility(p, s)?;
        row.out_of_range = !(in_unit_range(us) && in_unit_range(ub));
        row.seller_utility = Some(us);
        row.buyer_utility = Some(ub);
        row.joint_utility = Some(usb);
        let cs = concession_rate(Role::Seller, &seller_offers, s, log_floor)?;
        let cb = concession_rate(Role::Buyer, &buyer_offers, s, log_floor)?;
        row.seller_concession = (!cs.is_empty()).then_some(cs.value);
        row.buyer_concession = (!cb.is_empty()).then_some(cb.value);
    }
    Ok(row)
}

/// Fraction of successful negotiations.
pub fn success_rate(records: &[DialogueRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let n = records.iter().filter(|r| r.outcome.is_success()).count();
    Ok(n as f64 / records.len() as f64)
}

/// Mean round count over successful negotiations only.
pub fn avg_rounds(records: &[DialogueRecord]) -> Result<f64, MetricsError> {
    let rounds: Vec<usize> = records
        .iter()
        .filter(|r| r.outcome.is_success())
        .map(|r| r.outcome.rounds())
        .collect();
    if rounds.is_empty() {
        return Err(MetricsError::NoSuccesses);
    }
    Ok(rounds.iter().sum::<usize>() as f64 / rounds.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub dialogues: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub avg_rounds: Option<f64>,
    pub mean_seller_ideal: f64,
    pub mean_word_count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub dialogues: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub avg_rounds: Option<f64>,
    pub failures: BTreeMap<String, usize>,
    pub out_of_range: usize,
    pub mean_joint_utility: Option<f64>,
    pub by_category: BTreeMap<String, GroupSummary>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn group(rows: &[&MetricsRow]) -> GroupSummary {
    let successes = rows.iter().filter(|r| r.success).count();
    GroupSummary {
        dialogues: rows.len(),
        successes,
        success_rate: successes as f64 / rows.len().max(1) as f64,
        avg_rounds: mean(rows.iter().filter(|r| r.success).map(|r| r.rounds as f64)),
        mean_seller_ideal: mean(rows.iter().map(|r| r.seller_ideal)).unwrap_or(0.0),
        mean_word_count: mean(rows.iter().map(|r| r.word_count as f64)).unwrap_or(0.0),
    }
}

pub fn summarize(rows: &[MetricsRow]) -> Result<CorpusSummary, MetricsError> {
    if rows.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let all: Vec<&MetricsRow> = rows.iter().collect();
    let overall = group(&all);
    let mut failures = BTreeMap::new();
    for r in rows {
        if let Some(reason) = r.failure_reason {
            *failures.entry(reason.name().to_string()).or_insert(0) += 1;
        }
    }
    let mut by_category: BTreeMap<String, Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        let key = r.category.map_or("uncategorized", Category::name).to_string();
        by_category.entry(key).or_default().push(r);
    }
    Ok(CorpusSummary {
        dialogues: overall.dialogues,
        successes: overall.successes,
        success_rate: overall.success_rate,
        avg_rounds: overall.avg_rounds,
        failures,
        out_of_range: rows.iter().filter(|r| r.out_of_range).count(),
        mean_joint_utility: mean(rows.iter().filter_map(|r| r.joint_utility)),
        by_category: by_category.into_iter().map(|(k, v)| (k, group(&v))).collect(),
    })
}
