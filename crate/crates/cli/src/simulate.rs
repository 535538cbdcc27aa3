use std::collections::{BTreeMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};

use persona_bargain::personality::AdjectiveTable;
use persona_bargain::{
    run_negotiation, sample_profile, AgentConfig, DialogueRecord, GenerationBackend, NegotiationScenario, Outcome,
    PersonaInstruction, Role, StateDetector,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::corpus::{scan, CorpusLine, CORPUS_FILE};
use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    /// Resume into a corpus written under a different fingerprint.
    pub force: bool,
    /// Stop after writing this many new dialogues, as if the process had been
    /// killed. Used to exercise resumption.
    pub stop_after: Option<usize>,
}

/// Bookkeeping for one `simulate` invocation. Counts cover the whole corpus
/// file, including dialogues written by earlier sessions:
/// `completed + sum(failed) + pending == requested`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub fingerprint: String,
    pub config: RunConfig,
    pub started_at: String,
    pub finished_at: String,
    pub requested: usize,
    /// Dialogues that ended in a deal.
    pub completed: usize,
    /// Dialogues that ended without one, by reason.
    pub failed: BTreeMap<String, usize>,
    /// Requested dialogues not yet in the corpus.
    pub pending: usize,
    /// Dialogues found in the corpus when this session started.
    pub resumed: usize,
    pub corpus: PathBuf,
}

impl RunManifest {
    pub fn failed_total(&self) -> usize {
        self.failed.values().sum()
    }
}

pub fn dialogue_id(index: usize) -> String {
    format!("{index:06}")
}

/// Everything the workers share.
struct Plan<'a> {
    config: &'a RunConfig,
    scenarios: Vec<Arc<NegotiationScenario>>,
    table: AdjectiveTable,
    seller: Arc<dyn GenerationBackend>,
    buyer: Arc<dyn GenerationBackend>,
    detector: Box<dyn StateDetector>,
}

impl Plan<'_> {
    /// Builds dialogue `index` from its own RNG stream, so the result does not
    /// depend on which worker runs it or in what order.
    fn run(&self, index: usize) -> Result<DialogueRecord> {
        let c = self.config;
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        rng.set_stream(index as u64);
        let scenario = &self.scenarios[index % self.scenarios.len()];
        let mut side = |role: Role, backend: &Arc<dyn GenerationBackend>| -> Result<AgentConfig> {
            let profile = sample_profile(&mut rng);
            let persona = PersonaInstruction::for_profile(&profile, &self.table, c.adjectives_per_dimension, &mut rng)
                .map_err(CliError::config)?;
            let mut agent = AgentConfig::new(role, profile, persona, scenario.clone(), backend.clone());
            agent.max_reply_chars = c.max_reply_chars;
            Ok(agent)
        };
        let seller = side(Role::Seller, &self.seller)?;
        let buyer = side(Role::Buyer, &self.buyer)?;
        let mut record = run_negotiation(&seller, &buyer, self.detector.as_ref(), c.max_rounds).map_err(CliError::config)?;
        record.id = dialogue_id(index);
        Ok(record)
    }
}

fn tally(outcome: &Outcome, completed: &mut usize, failed: &mut BTreeMap<String, usize>) {
    match outcome {
        Outcome::Success { .. } => *completed += 1,
        Outcome::Failure { reason, .. } => *failed.entry(reason.name().to_string()).or_insert(0) += 1,
    }
}

/// Runs the batch described by `config`, appending to
/// `<output_dir>/dialogues.jsonl` and skipping ids already present.
pub fn simulate(config: &RunConfig, options: &SimulateOptions) -> Result<RunManifest> {
    let started_at = chrono::Utc::now().to_rfc3339();
    config.validate()?;
    let fingerprint = config.fingerprint()?;
    let scenarios: Vec<Arc<NegotiationScenario>> = config.load_scenarios()?.into_iter().map(Arc::new).collect();
    if config.dialogues > 0 && scenarios.is_empty() {
        return Err(CliError::Config(format!("{} holds no scenarios", config.scenario_file.display())));
    }
    let plan = Plan {
        config,
        scenarios,
        table: AdjectiveTable::bundled().map_err(CliError::config)?,
        seller: config.seller.build()?,
        buyer: config.buyer.build()?,
        detector: config.detector.build()?,
    };

    fs::create_dir_all(&config.output_dir)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", config.output_dir.display())))?;
    let corpus = config.output_dir.join(CORPUS_FILE);
    let io = |e: std::io::Error| CliError::Runtime(format!("{}: {e}", corpus.display()));

    let requested: Vec<String> = (0..config.dialogues).map(dialogue_id).collect();
    let wanted: HashSet<&str> = requested.iter().map(String::as_str).collect();
    let mut done = HashSet::new();
    let (mut completed, mut failed) = (0, BTreeMap::new());
    if corpus.exists() {
        let text = fs::read_to_string(&corpus).map_err(io)?;
        let existing = scan(&text)?;
        if existing.torn_tail {
            log::warn!("dropping a partial trailing line from {}", corpus.display());
            OpenOptions::new().write(true).open(&corpus).and_then(|f| f.set_len(existing.valid_len)).map_err(io)?;
        }
        if let Some(other) = existing.lines.iter().find(|l| l.fingerprint != fingerprint) {
            if !options.force {
                return Err(CliError::Runtime(format!(
                    "{} was written under fingerprint {}, this config is {}; pass --force to mix them",
                    corpus.display(),
                    other.fingerprint,
                    fingerprint
                )));
            }
        }
        for line in &existing.lines {
            let id = line.record.id.as_str();
            if wanted.contains(id) && done.insert(id.to_string()) {
                tally(&line.record.outcome, &mut completed, &mut failed);
            }
        }
    }
    let resumed = done.len();
    let pending: Vec<usize> = (0..config.dialogues).filter(|i| !done.contains(&requested[*i])).collect();
    log::info!("{} requested, {} already present, {} to run", requested.len(), resumed, pending.len());

    let mut file = OpenOptions::new().create(true).append(true).open(&corpus).map_err(io)?;
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let workers = config.workers.clamp(1, pending.len().max(1));
    let mut written = 0usize;
    let mut failure: Option<CliError> = None;

    std::thread::scope(|s| {
        let (tx, rx) = mpsc::sync_channel::<(usize, Result<DialogueRecord>)>(workers * 2);
        for _ in 0..workers {
            let tx = tx.clone();
            let (plan, pending, next, stop) = (&plan, &pending, &next, &stop);
            s.spawn(move || loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&index) = pending.get(k) else { break };
                if tx.send((k, plan.run(index))).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        // Single writer: results are released in id order so the file is
        // always a prefix of the full corpus.
        let mut buffer = BTreeMap::new();
        let mut want = 0usize;
        'recv: for (k, result) in rx {
            buffer.insert(k, result);
            while let Some(result) = buffer.remove(&want) {
                want += 1;
                let written_ok = result.and_then(|record| {
                    let line = CorpusLine {
                        fingerprint: fingerprint.clone(),
                        record,
                    };
                    file.write_all(line.to_line()?.as_bytes()).map_err(io)?;
                    Ok(line.record.outcome)
                });
                match written_ok {
                    Ok(outcome) => {
                        tally(&outcome, &mut completed, &mut failed);
                        written += 1;
                    }
                    Err(e) => {
                        failure = Some(e);
                        stop.store(true, Ordering::Relaxed);
                        break 'recv;
                    }
                }
                if options.stop_after.is_some_and(|n| written >= n) {
                    stop.store(true, Ordering::Relaxed);
                    break 'recv;
                }
            }
        }
    });
    file.flush().map_err(io)?;
    if let Some(e) = failure {
        return Err(e);
    }

    let manifest = RunManifest {
        fingerprint,
        config: config.clone(),
        started_at,
        finished_at: chrono::Utc::now().to_rfc3339(),
        requested: requested.len(),
        completed,
        pending: pending.len() - written,
        failed,
        resumed,
        corpus,
    };
    let path = config.output_dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).map_err(CliError::runtime)?;
    fs::write(&path, json + "\n").map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    Ok(manifest)
}
