//! IPIP-50 self-report administration and profile validation.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::LazyLock;

use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{BackendError, ChatClient, ChatMessage, ChatRole};
use crate::personality::{
    sample_profile, AdjectiveTable, Dimension, OrdinalEncoding, PersonaInstruction, PersonalityError,
    PersonalityProfile, TraitLevel,
};
use crate::stats::{spearman, stars, RankCorrelation, StatsError};

pub const BUNDLED_IPIP: &str = include_str!("../data/ipip50.tsv");

/// Significance cutoff for the validation grid.
pub const IPIP_STAR_LEVELS: [f64; 1] = [0.05];

/// Fewest agents `validate_profiles` accepts.
pub const MIN_AGENTS: usize = 30;

const ITEMS_PER_DIMENSION: usize = 10;

#[derive(Debug, Error)]
pub enum IpipError {
    #[error("items file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("expected {ITEMS_PER_DIMENSION} items for {dimension}, found {found}")]
    ItemCount { dimension: Dimension, found: usize },
    #[error("duplicate item id {0}")]
    DuplicateId(u8),
    #[error("unparseable Likert reply: {0:?}")]
    UnparseableReply(String),
    #[error("missing responses for items {0:?}")]
    MissingItems(Vec<u8>),
    #[error("unknown item id {0}")]
    UnknownItem(u8),
    #[error("need at least {needed} agents, got {got}")]
    TooFewAgents { needed: usize, got: usize },
    #[error(transparent)]
    Personality(#[from] PersonalityError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Keying {
    Positive,
    Negative,
}

impl Keying {
    /// Keyed score of a raw 1..=5 answer; negative keys reverse as `6 - s`.
    pub fn apply(self, score: u8) -> u8 {
        match self {
            Keying::Positive => score,
            Keying::Negative => 6 - score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IpipItem {
    pub id: u8,
    pub dimension: Dimension,
    pub keying: Keying,
    pub statement: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IpipInventory {
    items: Vec<IpipItem>,
}

impl IpipInventory {
    /// Parses `id<TAB>dimension<TAB>+|-<TAB>statement` lines and checks that
    /// every dimension has exactly ten items.
    pub fn parse(text: &str) -> Result<Self, IpipError> {
        let mut items: Vec<IpipItem> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let line = i + 1;
            let err = |message: &str| IpipError::Parse {
                line,
                message: message.to_string(),
            };
            let fields: Vec<&str> = raw.split('\t').collect();
            let [id, dim, key, statement] = fields[..] else {
                return Err(err("expected 4 tab-separated fields"));
            };
            let id: u8 = id.trim().parse().map_err(|_| err("bad item id"))?;
            let dimension = Dimension::from_str(dim).map_err(|_| err("unknown dimension"))?;
            let keying = match key.trim() {
                "+" => Keying::Positive,
                "-" => Keying::Negative,
                _ => return Err(err("keying must be + or -")),
            };
            if items.iter().any(|it| it.id == id) {
                return Err(IpipError::DuplicateId(id));
            }
            items.push(IpipItem {
                id,
                dimension,
                keying,
                statement: statement.trim().to_string(),
            });
        }
        for d in Dimension::ALL {
            let found = items.iter().filter(|it| it.dimension == d).count();
            if found != ITEMS_PER_DIMENSION {
                return Err(IpipError::ItemCount { dimension: d, found });
            }
        }
        items.sort_by_key(|it| it.id);
        Ok(IpipInventory { items })
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_IPIP).expect("bundled IPIP items are valid")
    }

    pub fn items(&self) -> &[IpipItem] {
        &self.items
    }

    pub fn item(&self, id: u8) -> Option<&IpipItem> {
        self.items.iter().find(|it| it.id == id)
    }

    pub fn by_statement(&self, statement: &str) -> Option<&IpipItem> {
        let s = statement.trim().trim_end_matches('.');
        self.items.iter().find(|it| it.statement.eq_ignore_ascii_case(s))
    }
}

pub fn render_ipip_prompt(persona: &PersonaInstruction, statement: &str) -> String {
    format!(
        "Act as person with following personality:\n{}\nEvaluate the following statement:\n{}.\n\n\
         Please rate how accurately this describes you on a scale from 1 to 5 (where 1 = \"very inaccurate\", \
         2 = \"moderately inaccurate\", 3 = \"neither accurate nor inaccurate\", 4 = \"moderately accurate\", \
         and 5 = \"very accurate\"). Please answer using EXACTLY one of the following:  1, 2, 3, 4, or 5.",
        persona.list(),
        statement.trim_end_matches('.')
    )
}

static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+(?:\.\d+)?").unwrap());

/// First standalone digit 1-5 in `reply`. Strict mode additionally rejects
/// replies containing any other digit.
pub fn parse_likert(reply: &str, strict: bool) -> Result<u8, IpipError> {
    let unparseable = || IpipError::UnparseableReply(reply.to_string());
    if strict && reply.chars().filter(char::is_ascii_digit).count() != 1 {
        return Err(unparseable());
    }
    NUMBER
        .find_iter(reply)
        .find_map(|m| match m.as_str() {
            d @ ("1" | "2" | "3" | "4" | "5") => d.parse().ok(),
            _ => None,
        })
        .ok_or_else(unparseable)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikertResponse {
    pub item_id: u8,
    /// Raw answer before reverse keying.
    pub score: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpipResult {
    /// Mean keyed score per dimension over answered items.
    pub means: BTreeMap<Dimension, f64>,
    pub answered: BTreeMap<Dimension, usize>,
    pub complete: bool,
}

/// Averages keyed scores per dimension. With `strict`, any unanswered item
/// is an error; otherwise means cover the answered items and `complete`
/// records whether all fifty were present.
pub fn score_ipip(responses: &[LikertResponse], inventory: &IpipInventory, strict: bool) -> Result<IpipResult, IpipError> {
    let mut sums: BTreeMap<Dimension, (f64, usize)> = BTreeMap::new();
    let mut seen = Vec::new();
    for r in responses {
        let item = inventory.item(r.item_id).ok_or(IpipError::UnknownItem(r.item_id))?;
        if !(1..=5).contains(&r.score) {
            return Err(IpipError::UnparseableReply(r.score.to_string()));
        }
        if seen.contains(&r.item_id) {
            return Err(IpipError::DuplicateId(r.item_id));
        }
        seen.push(r.item_id);
        let e = sums.entry(item.dimension).or_insert((0.0, 0));
        e.0 += f64::from(item.keying.apply(r.score));
        e.1 += 1;
    }
    let missing: Vec<u8> = inventory
        .items()
        .iter()
        .map(|it| it.id)
        .filter(|id| !seen.contains(id))
        .collect();
    if strict && !missing.is_empty() {
        return Err(IpipError::MissingItems(missing));
    }
    Ok(IpipResult {
        means: sums.iter().map(|(d, (s, n))| (*d, s / *n as f64)).collect(),
        answered: sums.iter().map(|(d, (_, n))| (*d, *n)).collect(),
        complete: missing.is_empty(),
    })
}

/// Anything that can answer a rendered IPIP prompt.
pub trait LikertResponder: Send + Sync {
    fn respond(&self, prompt: &str) -> Result<String, BackendError>;
}

/// Sends each prompt as a fresh single-message conversation.
pub struct ChatResponder {
    client: ChatClient,
}

impl ChatResponder {
    pub fn new(client: ChatClient) -> Self {
        ChatResponder { client }
    }
}

impl LikertResponder for ChatResponder {
    fn respond(&self, prompt: &str) -> Result<String, BackendError> {
        self.client.complete(&[ChatMessage::new(ChatRole::User, prompt)])
    }
}

/// Reads the persona and statement back out of the prompt and answers so the
/// keyed score tracks the persona's level on the item's dimension:
/// `---` 1, `--` 2, `-` 2 or 3, `+` 3 or 4, `++` 4, `+++` 5. The mild levels
/// alternate by item id so their dimension means land on 2.5 and 3.5.
pub struct ScriptedFaithfulResponder {
    table: AdjectiveTable,
    inventory: IpipInventory,
}

impl ScriptedFaithfulResponder {
    pub fn new(table: AdjectiveTable, inventory: IpipInventory) -> Self {
        ScriptedFaithfulResponder { table, inventory }
    }

    fn keyed_score(level: Option<TraitLevel>, item_id: u8) -> u8 {
        let odd = item_id % 2 == 1;
        match level.map(|l| l.default_ordinal()) {
            Some(-3) => 1,
            Some(-2) => 2,
            Some(-1) => 2 + u8::from(odd),
            Some(1) => 3 + u8::from(odd),
            Some(2) => 4,
            Some(3) => 5,
            _ => 3,
        }
    }
}

impl LikertResponder for ScriptedFaithfulResponder {
    fn respond(&self, prompt: &str) -> Result<String, BackendError> {
        let refuse = || BackendError::Refusal("prompt does not follow the IPIP template".into());
        let rest = prompt
            .strip_prefix("Act as person with following personality:\n")
            .ok_or_else(refuse)?;
        let (list, rest) = rest.split_once("\nEvaluate the following statement:\n").ok_or_else(refuse)?;
        let (statement, _) = rest.split_once("\n\n").ok_or_else(refuse)?;
        let item = self.inventory.by_statement(statement).ok_or_else(refuse)?;
        let levels = PersonaInstruction::infer_levels(list, &self.table);
        let keyed = Self::keyed_score(levels.get(&item.dimension).copied(), item.id);
        // keying is an involution, so applying it again gives the raw answer
        Ok(item.keying.apply(keyed).to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentAssessment {
    pub profile: PersonalityProfile,
    pub adjectives: Vec<String>,
    pub responses: Vec<LikertResponse>,
    pub result: IpipResult,
    /// Items whose reply could not be parsed.
    pub unparsed: Vec<u8>,
}

/// Asks every item in a fresh context and scores the answers leniently.
/// Backend errors abort the agent; unparseable replies mark the item missing.
pub fn administer(
    responder: &dyn LikertResponder,
    persona: &PersonaInstruction,
    inventory: &IpipInventory,
    strict_parsing: bool,
) -> Result<(Vec<LikertResponse>, Vec<u8>), BackendError> {
    let mut responses = Vec::with_capacity(inventory.items().len());
    let mut unparsed = Vec::new();
    for item in inventory.items() {
        let reply = responder.respond(&render_ipip_prompt(persona, &item.statement))?;
        match parse_likert(&reply, strict_parsing) {
            Ok(score) => responses.push(LikertResponse { item_id: item.id, score }),
            Err(_) => unparsed.push(item.id),
        }
    }
    Ok((responses, unparsed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpipGridCell {
    /// Dimension of the assigned profile.
    pub assigned: Dimension,
    /// Dimension of the IPIP score.
    pub measured: Dimension,
    pub correlation: Option<RankCorrelation>,
    pub stars: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpipValidation {
    pub agents: Vec<AgentAssessment>,
    /// Agents dropped after a backend error, with the error text.
    pub failures: Vec<String>,
    pub grid: Vec<IpipGridCell>,
}

impl IpipValidation {
    pub fn cell(&self, assigned: Dimension, measured: Dimension) -> Option<&IpipGridCell> {
        self.grid.iter().find(|c| c.assigned == assigned && c.measured == measured)
    }

    pub fn rho(&self, assigned: Dimension, measured: Dimension) -> Option<f64> {
        self.cell(assigned, measured)?.correlation.map(|c| c.rho)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Assigned |");
        for d in Dimension::ALL {
            out.push_str(&format!(" IPIP {} |", d.code()));
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(Dimension::ALL.len()));
        out.push('\n');
        for a in Dimension::ALL {
            out.push_str(&format!("| {} |", a.code()));
            for m in Dimension::ALL {
                match self.cell(a, m).and_then(|c| c.correlation.map(|r| (r.rho, &c.stars))) {
                    Some((rho, s)) => out.push_str(&format!(" {rho:.2}{s} |")),
                    None => out.push_str(" n/a |"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("assigned,measured,n,rho,p_value,stars\n");
        for c in &self.grid {
            let (n, rho, p) = match c.correlation {
                Some(r) => (r.n.to_string(), format!("{:.6}", r.rho), format!("{:.6}", r.p_value)),
                None => (String::new(), String::new(), String::new()),
            };
            out.push_str(&format!("{},{},{n},{rho},{p},{}\n", c.assigned.code(), c.measured.code(), c.stars));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ValidationOptions {
    pub n_agents: usize,
    pub adjectives_per_dimension: usize,
    pub encoding: OrdinalEncoding,
    pub strict_parsing: bool,
    /// Agents assessed concurrently.
    pub workers: usize,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            n_agents: 300,
            adjectives_per_dimension: 3,
            encoding: OrdinalEncoding::default(),
            strict_parsing: false,
            workers: 1,
        }
    }
}

/// One agent's answers and unparsed item ids, or the transport error.
type Administered = Result<(Vec<LikertResponse>, Vec<u8>), BackendError>;

/// Samples profiles, administers the inventory to each agent and correlates
/// assigned trait levels with measured dimension means.
pub fn validate_profiles<R: Rng + ?Sized>(
    responder: &dyn LikertResponder,
    table: &AdjectiveTable,
    inventory: &IpipInventory,
    options: &ValidationOptions,
    rng: &mut R,
) -> Result<IpipValidation, IpipError> {
    if options.n_agents < MIN_AGENTS {
        return Err(IpipError::TooFewAgents {
            needed: MIN_AGENTS,
            got: options.n_agents,
        });
    }
    let mut personas = Vec::with_capacity(options.n_agents);
    for _ in 0..options.n_agents {
        let profile = sample_profile(rng);
        let persona = PersonaInstruction::for_profile(&profile, table, options.adjectives_per_dimension, rng)?;
        personas.push((profile, persona));
    }

    let workers = options.workers.clamp(1, personas.len());
    let chunk = personas.len().div_ceil(workers);
    let outcomes: Vec<Administered> = std::thread::scope(|s| {
        let handles: Vec<_> = personas
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|(_, persona)| administer(responder, persona, inventory, options.strict_parsing))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("assessment worker panicked"))
            .collect()
    });

    let mut agents = Vec::new();
    let mut failures = Vec::new();
    for ((profile, persona), outcome) in personas.into_iter().zip(outcomes) {
        match outcome {
            Ok((responses, unparsed)) => {
                let result = score_ipip(&responses, inventory, false)?;
                agents.push(AgentAssessment {
                    profile,
                    adjectives: persona.adjectives,
                    responses,
                    result,
                    unparsed,
                });
            }
            Err(e) => failures.push(e.to_string()),
        }
    }

    let mut grid = Vec::with_capacity(25);
    for assigned in Dimension::ALL {
        for measured in Dimension::ALL {
            let (x, y): (Vec<f64>, Vec<f64>) = agents
                .iter()
                .filter_map(|a| {
                    let m = a.result.means.get(&measured)?;
                    Some((options.encoding.encode(a.profile.level(assigned)), *m))
                })
                .unzip();
            let correlation = spearman(&x, &y).ok();
            grid.push(IpipGridCell {
                assigned,
                measured,
                stars: correlation.map_or_else(String::new, |c| stars(c.p_value, &IPIP_STAR_LEVELS)),
                correlation,
            });
        }
    }
    Ok(IpipValidation { agents, failures, grid })
}
