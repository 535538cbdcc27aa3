use std::path::PathBuf;

use persona_bargain::ipip::{IpipValidation, ValidationOptions};
use persona_bargain::personality::AdjectiveTable;
use persona_bargain::{validate_profiles, IpipInventory};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analyze::{json, with_fingerprint, write_all};
use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// IPIP agents draw from a stream no dialogue index reaches.
const IPIP_STREAM: u64 = u64::MAX;

#[derive(Serialize)]
struct AgentLine<'a, T: Serialize> {
    fingerprint: &'a str,
    #[serde(flatten)]
    agent: &'a T,
}

/// Runs the personality-inventory check for `config` and writes the grid,
/// the per-agent answers and a summary into the output directory.
pub fn run_ipip(config: &RunConfig) -> Result<(IpipValidation, Vec<PathBuf>)> {
    config.validate()?;
    let fingerprint = config.fingerprint()?;
    let table = AdjectiveTable::bundled().map_err(CliError::config)?;
    let inventory = IpipInventory::bundled();
    let responder = config.ipip.responder.build(&table, &inventory)?;
    let options = ValidationOptions {
        n_agents: config.ipip.agents,
        adjectives_per_dimension: config.adjectives_per_dimension,
        strict_parsing: config.ipip.strict_parsing,
        workers: config.workers,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(IPIP_STREAM);
    let validation = validate_profiles(responder.as_ref(), &table, &inventory, &options, &mut rng).map_err(|e| {
        use persona_bargain::ipip::IpipError;
        match e {
            IpipError::TooFewAgents { .. } | IpipError::Personality(_) => CliError::config(e),
            other => CliError::runtime(other),
        }
    })?;

    let mut agents = String::new();
    for a in &validation.agents {
        let line = AgentLine {
            fingerprint: &fingerprint,
            agent: a,
        };
        agents.push_str(&serde_json::to_string(&line).map_err(CliError::runtime)?);
        agents.push('\n');
    }
    let mut md = format!("# Personality inventory check\n\nCorpus fingerprint: `{fingerprint}`\n\n");
    md.push_str(&format!(
        "{} agents assessed, {} failed. Spearman correlation between assigned level and inventory score. * p < 0.05.\n\n",
        validation.agents.len(),
        validation.failures.len()
    ));
    md.push_str(&validation.to_markdown());

    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", config.output_dir.display())))?;
    let files = write_all(
        &config.output_dir,
        vec![
            ("ipip_grid.csv", with_fingerprint(&validation.to_csv(), &fingerprint)),
            ("ipip_grid.md", md),
            ("ipip_agents.jsonl", agents),
            (
                "ipip_summary.json",
                json(&serde_json::json!({
                    "fingerprint": fingerprint,
                    "agents": validation.agents.len(),
                    "failures": validation.failures,
                    "grid": validation.grid,
                }))?,
            ),
        ],
    )?;
    Ok((validation, files))
}
