use std::collections::BTreeMap;
use std::sync::Arc;

use persona_bargain::analysis::{
    canonical_strategies, dependence_grid, price_length_report, strategy_regression, RegressionTarget,
};
use persona_bargain::ipip::{validate_profiles, IpipInventory, ScriptedFaithfulResponder, ValidationOptions};
use persona_bargain::metrics::{metrics_row, DEFAULT_LOG_FLOOR};
use persona_bargain::personality::{AdjectiveTable, PersonaInstruction};
use persona_bargain::stats::StrategyMap;
use persona_bargain::{
    run_negotiation, sample_profile, AgentConfig, Category, ConcessionPolicy, Dimension, DialogueRecord,
    MetricsRow, NegotiationScenario, Price, Role, ScriptedBackend, ScriptedDetector, ZonePlacement,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;

fn row(seller_ideal: f64, rounds: usize, category: Option<Category>) -> MetricsRow {
    MetricsRow {
        dialogue_id: String::new(),
        category,
        success: true,
        failure_reason: None,
        rounds,
        deal_price: Some(seller_ideal),
        seller_utility: None,
        buyer_utility: None,
        joint_utility: None,
        seller_concession: None,
        buyer_concession: None,
        seller_offers: 0,
        buyer_offers: 0,
        out_of_range: false,
        seller_ideal,
        word_count: rounds * 7,
    }
}

#[test]
fn rounds_linear_in_log_price_correlate_perfectly() {
    let rows: Vec<MetricsRow> = (1..=12)
        .map(|k| row((k as f64).exp(), 2 * k, Some(Category::Electronics)))
        .collect();
    let r = price_length_report(&rows).unwrap();
    assert!((r.log_price_vs_rounds.unwrap().rho - 1.0).abs() < 1e-12);
    assert!((r.log_price_vs_words.unwrap().rho - 1.0).abs() < 1e-12);
    assert!(r.price_vs_rounds.unwrap().rho < 1.0 - 1e-3);
    assert_eq!(r.categories.len(), 1);
    assert_eq!(r.categories[0].category, "electronics");
    assert_eq!(r.categories[0].dialogues, 12);
    assert!(price_length_report(&[]).is_err());
}

fn scripted_corpus(n: usize, seed: u64) -> Vec<DialogueRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = AdjectiveTable::bundled().unwrap();
    let detector = ScriptedDetector::default();
    (0..n)
        .map(|i| {
            let lo = rng.random_range(20..500);
            let s = Arc::new(
                NegotiationScenario::new("Bike", "", Price::from(lo * 2), Price::from(lo), Decimal::new(7, 1), ZonePlacement::Centered)
                    .unwrap(),
            );
            let mut side = |role| {
                let profile = sample_profile(&mut rng);
                let persona = PersonaInstruction::for_profile(&profile, &table, 3, &mut rng).unwrap();
                let policy = ConcessionPolicy::new(rng.random_range(0.3..3.0), 12).with_patience(rng.random_range(8..20));
                AgentConfig::new(role, profile, persona, s.clone(), Arc::new(ScriptedBackend::new(policy)))
            };
            let (seller, buyer) = (side(Role::Seller), side(Role::Buyer));
            let mut r = run_negotiation(&seller, &buyer, &detector, 20).unwrap();
            r.id = format!("d{i}");
            r
        })
        .collect()
}

#[test]
fn strategy_regression_uses_frequent_categories_and_deals_only() {
    let records = scripted_corpus(120, 5);
    let rows: Vec<MetricsRow> = records.iter().map(|r| metrics_row(r, DEFAULT_LOG_FLOOR).unwrap()).collect();
    let map = StrategyMap::bundled();
    let successes = rows.iter().filter(|r| r.success).count();
    assert!(successes > 20);

    for target in [RegressionTarget::Joint, RegressionTarget::Intrinsic(Role::Seller)] {
        let reg = strategy_regression(&records, &rows, &map, target, 20, false).unwrap();
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for r in &records {
            let roles: &[Role] = match target {
                RegressionTarget::Joint => &[Role::Seller, Role::Buyer],
                _ => &[Role::Seller],
            };
            for role in roles {
                for l in canonical_strategies(r, *role, &map) {
                    *counts.entry(l).or_default() += 1;
                }
            }
        }
        assert_eq!(reg.counts, counts);
        let mut used: Vec<String> = reg.result.coefficients.iter().map(|(n, _)| n.clone()).collect();
        used.extend(reg.result.dropped.iter().cloned());
        used.sort();
        let expected: Vec<String> = counts.iter().filter(|(_, c)| **c > 20).map(|(l, _)| l.clone()).collect();
        assert_eq!(used, expected);
        assert_eq!(reg.result.n, successes);
    }
}

#[test]
fn dependence_tables_count_strategies_by_polarity() {
    let records = scripted_corpus(120, 6);
    let map = StrategyMap::bundled();
    let grid = dependence_grid(&records, &map, 20);
    assert!(!grid.is_empty());
    for dep in &grid {
        let total: u64 = dep.table.counts.iter().flatten().sum();
        let expected: usize = records
            .iter()
            .map(|r| {
                canonical_strategies(r, dep.role, &map)
                    .iter()
                    .filter(|l| dep.table.row_labels.contains(l))
                    .count()
            })
            .sum();
        assert_eq!(total as usize, expected);
        assert_eq!(dep.table.col_labels[0], format!("{}-", dep.dimension.code()));
        assert!(dep.result.is_some() || dep.error.is_some());
    }
}

#[test]
fn faithful_responder_grid_is_diagonal_and_reproducible() {
    let table = AdjectiveTable::bundled().unwrap();
    let inventory = IpipInventory::bundled();
    let responder = ScriptedFaithfulResponder::new(table.clone(), inventory.clone());
    let run = |workers| {
        let opts = ValidationOptions {
            n_agents: 60,
            workers,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        validate_profiles(&responder, &table, &inventory, &opts, &mut rng).unwrap()
    };
    let v = run(1);
    assert!(v.failures.is_empty());
    assert!(v.agents.iter().all(|a| a.result.complete && a.unparsed.is_empty()));
    for d in Dimension::ALL {
        let diag = v.rho(d, d).unwrap();
        assert!(diag >= 0.95, "{d}: {diag}");
    }
    let again = run(4);
    assert_eq!(v, again);
    assert_eq!(v.to_csv(), again.to_csv());
}
