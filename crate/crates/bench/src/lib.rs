//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use persona_bargain::personality::{AdjectiveTable, PersonaInstruction};
use persona_bargain::{
    sample_profile, AgentConfig, ConcessionPolicy, Dimension, NegotiationScenario, Price, Role, ScriptedBackend,
    ZonePlacement,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two loosely correlated series of length `n`, with ties.
pub fn series(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let x: Vec<f64> = (0..n).map(|_| r.random_range(0..6) as f64).collect();
    let y = x.iter().map(|v| v + r.random_range(-2.0..2.0)).collect();
    (x, y)
}

/// A scripted seller and buyer for one scenario.
pub fn scripted_pair(seed: u64) -> (AgentConfig, AgentConfig) {
    let mut r = rng(seed);
    let table = AdjectiveTable::bundled().expect("bundled table parses");
    let scenario = Arc::new(
        NegotiationScenario::new("Road Bike", "", Price::from(700), Price::from(520), Decimal::new(7, 1), ZonePlacement::Centered)
            .expect("valid prices"),
    );
    let mut side = |role, c| {
        let profile = sample_profile(&mut r);
        let persona = PersonaInstruction::for_profile(&profile, &table, 3, &mut r).expect("3 adjectives fit");
        let policy = ConcessionPolicy::new(c, 14).with_trait_weight(Dimension::Agr, 0.8);
        AgentConfig::new(role, profile, persona, scenario.clone(), Arc::new(ScriptedBackend::new(policy)))
    };
    (side(Role::Seller, 1.2), side(Role::Buyer, 0.9))
}
