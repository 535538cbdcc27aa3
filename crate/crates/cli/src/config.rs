use std::path::{Path, PathBuf};
use std::sync::Arc;

use persona_bargain::dialogue::PricePick;
use persona_bargain::ipip::ChatResponder;
use persona_bargain::metrics::DEFAULT_LOG_FLOOR;
use persona_bargain::scenario::{default_zone_fraction, parse_scenarios};
use persona_bargain::{
    CannedBackend, ChatBackend, ChatClient, ChatEndpoint, ConcessionPolicy, GenerationBackend, IpipInventory,
    LikertResponder, LlmDetector, NegotiationScenario, ScriptedBackend, ScriptedDetector, ScriptedFaithfulResponder,
    StateDetector, ZonePlacement, DEFAULT_MAX_ROUNDS,
};
use persona_bargain::personality::AdjectiveTable;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// How one side of the negotiation produces its replies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    Scripted { policy: ConcessionPolicy },
    Chat { endpoint: ChatEndpoint },
    Canned { replies: Vec<String> },
}

impl BackendSpec {
    pub fn build(&self) -> Result<Arc<dyn GenerationBackend>> {
        Ok(match self {
            BackendSpec::Scripted { policy } => {
                if !(policy.base_exponent.is_finite() && policy.base_exponent >= 0.0) || policy.horizon == 0 {
                    return Err(CliError::Config(format!(
                        "scripted policy needs a finite exponent >= 0 and a positive horizon, got c={} T={}",
                        policy.base_exponent, policy.horizon
                    )));
                }
                Arc::new(ScriptedBackend::new(policy.clone()))
            }
            BackendSpec::Chat { endpoint } => {
                Arc::new(ChatBackend::new(ChatClient::new(endpoint.clone()).map_err(CliError::config)?))
            }
            BackendSpec::Canned { replies } => {
                if replies.is_empty() {
                    return Err(CliError::config("canned backend needs at least one reply"));
                }
                Arc::new(CannedBackend::new(replies.iter().cloned()))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorSpec {
    /// Keyword rules; needs no model.
    Rules {
        #[serde(default)]
        price_pick: PricePick,
    },
    Chat { endpoint: ChatEndpoint },
}

impl Default for DetectorSpec {
    fn default() -> Self {
        DetectorSpec::Rules {
            price_pick: PricePick::default(),
        }
    }
}

impl DetectorSpec {
    pub fn build(&self) -> Result<Box<dyn StateDetector>> {
        Ok(match self {
            DetectorSpec::Rules { price_pick } => Box::new(ScriptedDetector { price_pick: *price_pick }),
            DetectorSpec::Chat { endpoint } => {
                Box::new(LlmDetector::new(ChatClient::new(endpoint.clone()).map_err(CliError::config)?))
            }
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResponderSpec {
    /// Answers from the persona's adjectives; a harness check, not a model.
    #[default]
    Faithful,
    Chat { endpoint: ChatEndpoint },
}

impl ResponderSpec {
    pub fn build(&self, table: &AdjectiveTable, inventory: &IpipInventory) -> Result<Box<dyn LikertResponder>> {
        Ok(match self {
            ResponderSpec::Faithful => Box::new(ScriptedFaithfulResponder::new(table.clone(), inventory.clone())),
            ResponderSpec::Chat { endpoint } => {
                Box::new(ChatResponder::new(ChatClient::new(endpoint.clone()).map_err(CliError::config)?))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IpipSettings {
    #[serde(default = "default_ipip_agents")]
    pub agents: usize,
    #[serde(default)]
    pub strict_parsing: bool,
    #[serde(default)]
    pub responder: ResponderSpec,
}

impl Default for IpipSettings {
    fn default() -> Self {
        IpipSettings {
            agents: default_ipip_agents(),
            strict_parsing: false,
            responder: ResponderSpec::default(),
        }
    }
}

fn default_ipip_agents() -> usize {
    300
}

fn default_adjectives() -> usize {
    3
}

fn default_max_rounds() -> usize {
    DEFAULT_MAX_ROUNDS
}

fn default_workers() -> usize {
    1
}

fn default_log_floor() -> f64 {
    DEFAULT_LOG_FLOOR
}

/// A batch run as read from its JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// JSON array of scenario entries; relative paths resolve against the
    /// directory of the config file.
    pub scenario_file: PathBuf,
    pub dialogues: usize,
    #[serde(default = "default_adjectives")]
    pub adjectives_per_dimension: usize,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default = "default_zone_fraction")]
    pub zone_fraction: Decimal,
    #[serde(default)]
    pub zone_placement: ZonePlacement,
    pub seller: BackendSpec,
    pub buyer: BackendSpec,
    #[serde(default)]
    pub detector: DetectorSpec,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub output_dir: PathBuf,
    #[serde(default = "default_log_floor")]
    pub log_floor: f64,
    #[serde(default)]
    pub max_reply_chars: Option<usize>,
    #[serde(default)]
    pub ipip: IpipSettings,
}

impl RunConfig {
    /// A config with every default filled in and scripted agents on both sides.
    pub fn scripted(seed: u64, scenario_file: impl Into<PathBuf>, dialogues: usize, output_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            seed,
            scenario_file: scenario_file.into(),
            dialogues,
            adjectives_per_dimension: default_adjectives(),
            max_rounds: default_max_rounds(),
            zone_fraction: default_zone_fraction(),
            zone_placement: ZonePlacement::default(),
            seller: BackendSpec::Scripted {
                policy: ConcessionPolicy::new(1.0, 12),
            },
            buyer: BackendSpec::Scripted {
                policy: ConcessionPolicy::new(1.0, 12),
            },
            detector: DetectorSpec::default(),
            workers: default_workers(),
            output_dir: output_dir.into(),
            log_floor: default_log_floor(),
            max_reply_chars: None,
            ipip: IpipSettings::default(),
        }
    }

    /// Reads and validates a config; relative paths are rebased onto the
    /// config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut config: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.scenario_file, &mut config.output_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.max_rounds < 2 {
            return bad(format!("max_rounds must be at least 2, got {}", self.max_rounds));
        }
        if !(1..=5).contains(&self.adjectives_per_dimension) {
            return bad(format!("adjectives_per_dimension must be 1..=5, got {}", self.adjectives_per_dimension));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if !(self.log_floor > 0.0 && self.log_floor < 1.0) {
            return bad(format!("log_floor must lie in (0, 1), got {}", self.log_floor));
        }
        if self.zone_fraction <= Decimal::ZERO || self.zone_fraction > Decimal::ONE {
            return bad(format!("zone_fraction must lie in (0, 1], got {}", self.zone_fraction));
        }
        Ok(())
    }

    pub fn scenario_text(&self) -> Result<String> {
        std::fs::read_to_string(&self.scenario_file)
            .map_err(|e| CliError::Config(format!("{}: {e}", self.scenario_file.display())))
    }

    pub fn load_scenarios(&self) -> Result<Vec<NegotiationScenario>> {
        parse_scenarios(&self.scenario_text()?, self.zone_fraction, self.zone_placement)
            .map_err(|e| CliError::Config(format!("{}: {e}", self.scenario_file.display())))
    }

    /// SHA-256 over everything that shapes the corpus: the config minus its
    /// output location and worker count, plus the scenario file contents.
    pub fn fingerprint(&self) -> Result<String> {
        let mut view = self.clone();
        view.output_dir = PathBuf::new();
        view.workers = 0;
        view.scenario_file = PathBuf::new();
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(&view).map_err(CliError::config)?);
        hasher.update(b"\n");
        hasher.update(self.scenario_text()?.as_bytes());
        Ok(format!("{:x}", hasher.finalize()))
    }
}
