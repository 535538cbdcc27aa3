//! Alternating-offers dialogue loop with per-utterance state detection.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::agents::{generate_reply, AgentConfig, AgentError, Role, SELLER_OPENER};
use crate::extract;
use crate::llm::{BackendError, ChatClient, ChatMessage, ChatRole, ToolSpec};
use crate::personality::PersonalityProfile;
use crate::scenario::NegotiationScenario;

/// Default dialogue length cap, counted in utterances.
pub const DEFAULT_MAX_ROUNDS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    /// 1-based round.
    pub index: usize,
    pub speaker: Role,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegotiationState {
    Offer,
    Ponder,
    Accept,
    DealBreak,
    ChitChat,
}

impl NegotiationState {
    pub fn parse_label(s: &str) -> Option<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "offer" => Some(NegotiationState::Offer),
            "ponder" => Some(NegotiationState::Ponder),
            "accept" => Some(NegotiationState::Accept),
            "dealbreak" => Some(NegotiationState::DealBreak),
            "chitchat" => Some(NegotiationState::ChitChat),
            _ => None,
        }
    }
}

/// Detector output for one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub state: NegotiationState,
    pub price: Option<f64>,
    pub strategy: Option<String>,
}

impl Annotation {
    pub fn chit_chat() -> Self {
        Annotation {
            state: NegotiationState::ChitChat,
            price: None,
            strategy: None,
        }
    }
}

/// Per-turn flags that let analysis exclude degraded annotations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnFlags {
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub detector_parse_failure: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub truncated: bool,
    /// An acceptance arrived before any price was on the table and was
    /// downgraded to `ponder`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub accept_without_price: bool,
}

impl TurnFlags {
    fn is_clean(&self) -> bool {
        *self == TurnFlags::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedTurn {
    #[serde(flatten)]
    pub utterance: Utterance,
    pub state: NegotiationState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(default, skip_serializing_if = "TurnFlags::is_clean")]
    pub flags: TurnFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    DealBreak,
    MaxRounds,
    BackendError,
}

impl FailureReason {
    pub fn name(self) -> &'static str {
        match self {
            FailureReason::DealBreak => "deal_break",
            FailureReason::MaxRounds => "max_rounds",
            FailureReason::BackendError => "backend_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Success {
        deal_price: f64,
        rounds: usize,
    },
    Failure {
        reason: FailureReason,
        rounds: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detail: Option<String>,
    },
}

impl Outcome {
    pub fn is_success(&self) -> bool {
        matches!(self, Outcome::Success { .. })
    }

    pub fn rounds(&self) -> usize {
        match self {
            Outcome::Success { rounds, .. } | Outcome::Failure { rounds, .. } => *rounds,
        }
    }

    pub fn deal_price(&self) -> Option<f64> {
        match self {
            Outcome::Success { deal_price, .. } => Some(*deal_price),
            Outcome::Failure { .. } => None,
        }
    }
}

/// A finished dialogue with its annotations and outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueRecord {
    pub id: String,
    pub scenario: NegotiationScenario,
    pub seller_profile: PersonalityProfile,
    pub buyer_profile: PersonalityProfile,
    pub seller_adjectives: Vec<String>,
    pub buyer_adjectives: Vec<String>,
    pub turns: Vec<AnnotatedTurn>,
    pub outcome: Outcome,
}

impl DialogueRecord {
    pub fn profile(&self, role: Role) -> &PersonalityProfile {
        match role {
            Role::Seller => &self.seller_profile,
            Role::Buyer => &self.buyer_profile,
        }
    }

    /// `(round, price)` of every offer made by `role`.
    pub fn offers(&self, role: Role) -> Vec<(usize, f64)> {
        self.turns
            .iter()
            .filter(|t| t.utterance.speaker == role && t.state == NegotiationState::Offer)
            .filter_map(|t| t.price.map(|p| (t.utterance.index, p)))
            .collect()
    }

    /// Strategy strings used by `role`, skipping degraded turns.
    pub fn strategies(&self, role: Role) -> Vec<&str> {
        self.turns
            .iter()
            .filter(|t| t.utterance.speaker == role && !t.flags.detector_parse_failure)
            .filter_map(|t| t.strategy.as_deref())
            .collect()
    }

    /// Whitespace-delimited tokens over all utterances.
    pub fn word_count(&self) -> usize {
        self.turns
            .iter()
            .map(|t| t.utterance.text.split_whitespace().count())
            .sum()
    }

    /// Checks the structural invariants every record must satisfy.
    pub fn check_invariants(&self, max_rounds: usize) -> Result<(), String> {
        let n = self.turns.len();
        if n == 0 || n > max_rounds {
            return Err(format!("turn count {n} outside 1..={max_rounds}"));
        }
        if self.turns[0].utterance.text != SELLER_OPENER {
            return Err("first turn is not the seller opener".into());
        }
        for (i, t) in self.turns.iter().enumerate() {
            if t.utterance.index != i + 1 {
                return Err(format!("turn {i} has index {}", t.utterance.index));
            }
            if t.utterance.speaker != Role::speaker_at(i + 1) {
                return Err(format!("turn {} spoken by {}", i + 1, t.utterance.speaker));
            }
            if t.state == NegotiationState::Offer && t.price.is_none() {
                return Err(format!("offer at turn {} has no price", i + 1));
            }
            if t.price.is_some_and(|p| p.is_nan() || p <= 0.0) {
                return Err(format!("non-positive price at turn {}", i + 1));
            }
        }
        if self.outcome.rounds() != n {
            return Err(format!("outcome rounds {} != turns {n}", self.outcome.rounds()));
        }
        let accepts = self
            .turns
            .iter()
            .filter(|t| t.state == NegotiationState::Accept)
            .count();
        match &self.outcome {
            Outcome::Success { deal_price, .. } => {
                if accepts != 1 || self.turns[n - 1].state != NegotiationState::Accept {
                    return Err("success without a single final accept".into());
                }
                if deal_price.is_nan() || *deal_price <= 0.0 {
                    return Err("non-positive deal price".into());
                }
            }
            Outcome::Failure { reason, .. } => {
                if accepts != 0 {
                    return Err("failure record contains an accept".into());
                }
                if *reason == FailureReason::MaxRounds && n != max_rounds {
                    return Err(format!("max_rounds failure after {n} turns"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectorError {
    #[error("detector reply could not be parsed: {0}")]
    ParseFailure(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Labels an utterance given everything said before it.
pub trait StateDetector: Send + Sync {
    fn id(&self) -> String;

    fn detect(&self, context: &[Utterance], last: &Utterance) -> Result<Annotation, DetectorError>;
}

/// Which amount the rule-based detector keeps when several are mentioned.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PricePick {
    #[default]
    Last,
    First,
}

/// Keyword and pattern rules; a total function.
#[derive(Debug, Clone, Default)]
pub struct ScriptedDetector {
    pub price_pick: PricePick,
}

const DEAL_BREAK_CUES: [&str; 4] = ["walk away", "walking away", "no deal", "walked away"];
const NEGATED_ACCEPT_CUES: [&str; 4] = ["can't accept", "cannot accept", "not accept", "won't accept"];
const PRICE_QUESTION_CUES: [&str; 6] = ["price", "how much", "cost", "offer", "lower", "go down"];

impl ScriptedDetector {
    pub fn annotate(&self, text: &str) -> Annotation {
        let lower = text.to_lowercase();
        let amounts = extract::currency_amounts(text);
        let price = match self.price_pick {
            PricePick::Last => amounts.last().copied(),
            PricePick::First => amounts.first().copied(),
        }
        .filter(|p| *p > 0.0);
        let strategy = extract::strategy_tag(text);

        if DEAL_BREAK_CUES.iter().any(|c| lower.contains(c)) {
            return Annotation {
                state: NegotiationState::DealBreak,
                price: None,
                strategy,
            };
        }
        let negated = NEGATED_ACCEPT_CUES.iter().any(|c| lower.contains(c));
        if !negated && (lower.contains("deal") || lower.contains("accept")) {
            return Annotation {
                state: NegotiationState::Accept,
                price,
                strategy,
            };
        }
        if price.is_some() {
            return Annotation {
                state: NegotiationState::Offer,
                price,
                strategy,
            };
        }
        if lower.contains('?') && PRICE_QUESTION_CUES.iter().any(|c| lower.contains(c)) {
            return Annotation {
                state: NegotiationState::Ponder,
                price: None,
                strategy,
            };
        }
        Annotation {
            state: NegotiationState::ChitChat,
            price: None,
            strategy,
        }
    }
}

impl StateDetector for ScriptedDetector {
    fn id(&self) -> String {
        format!("rules:{:?}", self.price_pick).to_lowercase()
    }

    fn detect(&self, _context: &[Utterance], last: &Utterance) -> Result<Annotation, DetectorError> {
        Ok(self.annotate(&last.text))
    }
}

/// Renders the structured-extraction prompt for the last speaker.
pub fn render_detector_prompt(context: &[Utterance], last: &Utterance) -> String {
    let mut out = format!(
        "You will be given a partial dialogue in which a buyer and a seller negotiate about a deal. \
         Predict the average product price, dialogue state and the strategy of the {} by the end of the dialogue.\n\n\
         [The dialogue]\n",
        last.speaker
    );
    for u in context.iter().chain(std::iter::once(last)) {
        out.push_str(&format!("{}: {}\n", u.speaker, u.text));
    }
    out
}

pub fn detector_tool() -> ToolSpec {
    ToolSpec {
        name: "report_dialogue_state".into(),
        description: "Report the negotiation state, the current proposed price and the strategy of the last speaker. \
                      If several pieces are being negotiated, report the average price per piece."
            .into(),
        parameters: json!({
            "type": "object",
            "properties": {
                "state": {
                    "type": "string",
                    "enum": ["offer", "ponder", "accept", "deal-break", "chit-chat"],
                    "description": "offer: makes a price offer; ponder: considers whether to accept or reject; accept: accepts the current offer; deal-break: refuses the last offer or walks away; chit-chat: talk unrelated to the negotiation"
                },
                "price": {
                    "type": ["number", "null"],
                    "description": "The price currently proposed by the last speaker, or null"
                },
                "strategy": {
                    "type": "string",
                    "description": "Short free-text description of the last speaker's strategy"
                }
            },
            "required": ["state", "price", "strategy"]
        }),
    }
}

/// Converts the tool-call arguments into an [`Annotation`].
pub fn parse_detector_reply(value: &Value) -> Result<Annotation, DetectorError> {
    let state_raw = value
        .get("state")
        .and_then(Value::as_str)
        .ok_or_else(|| DetectorError::ParseFailure(format!("missing state in {value}")))?;
    let state = NegotiationState::parse_label(state_raw)
        .ok_or_else(|| DetectorError::ParseFailure(format!("unknown state `{state_raw}`")))?;
    let price = match value.get("price") {
        None | Some(Value::Null) => None,
        Some(Value::Number(n)) => n.as_f64(),
        Some(Value::String(s)) => {
            let cleaned: String = s.chars().filter(|c| c.is_ascii_digit() || *c == '.').collect();
            if cleaned.is_empty() {
                None
            } else {
                Some(cleaned.parse::<f64>().map_err(|_| {
                    DetectorError::ParseFailure(format!("bad price `{s}`"))
                })?)
            }
        }
        Some(other) => return Err(DetectorError::ParseFailure(format!("bad price {other}"))),
    }
    .filter(|p| p.is_finite() && *p > 0.0);
    let strategy = value
        .get("strategy")
        .and_then(Value::as_str)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string);
    if state == NegotiationState::Offer && price.is_none() {
        return Err(DetectorError::ParseFailure("offer without a positive price".into()));
    }
    Ok(Annotation {
        state,
        price,
        strategy,
    })
}

/// Third-model detector backed by a forced tool call.
pub struct LlmDetector {
    client: ChatClient,
}

impl LlmDetector {
    pub fn new(client: ChatClient) -> Self {
        LlmDetector { client }
    }
}

impl StateDetector for LlmDetector {
    fn id(&self) -> String {
        format!("chat:{}@{}", self.client.endpoint().model, self.client.endpoint().url)
    }

    fn detect(&self, context: &[Utterance], last: &Utterance) -> Result<Annotation, DetectorError> {
        let messages = [ChatMessage::new(ChatRole::User, render_detector_prompt(context, last))];
        let args = self
            .client
            .call_tool(&messages, &detector_tool())
            .map_err(|e| match e {
                BackendError::Refusal(msg) => DetectorError::ParseFailure(msg),
                other => DetectorError::Backend(other),
            })?;
        parse_detector_reply(&args)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SetupError {
    #[error("expected a seller and a buyer, got {seller} and {buyer}")]
    RoleMismatch { seller: Role, buyer: Role },
    #[error("agents are bound to different scenarios")]
    ScenarioMismatch,
    #[error("max_rounds must be at least 2, got {0}")]
    MaxRoundsTooSmall(usize),
}

/// Runs one negotiation to completion. Backend errors, deal breaks and the
/// round cap all end in a `Failure` outcome; the record is always produced.
pub fn run_negotiation(
    seller: &AgentConfig,
    buyer: &AgentConfig,
    detector: &dyn StateDetector,
    max_rounds: usize,
) -> Result<DialogueRecord, SetupError> {
    if seller.role != Role::Seller || buyer.role != Role::Buyer {
        return Err(SetupError::RoleMismatch {
            seller: seller.role,
            buyer: buyer.role,
        });
    }
    if !Arc::ptr_eq(&seller.scenario, &buyer.scenario) && seller.scenario != buyer.scenario {
        return Err(SetupError::ScenarioMismatch);
    }
    if max_rounds < 2 {
        return Err(SetupError::MaxRoundsTooSmall(max_rounds));
    }

    let opener = Utterance {
        index: 1,
        speaker: Role::Seller,
        text: SELLER_OPENER.to_string(),
    };
    let mut history = vec![opener.clone()];
    let mut turns = vec![AnnotatedTurn {
        utterance: opener,
        state: NegotiationState::ChitChat,
        price: None,
        strategy: None,
        flags: TurnFlags::default(),
    }];
    let mut last_offer: Option<f64> = None;

    let outcome = loop {
        let t = history.len() + 1;
        if t > max_rounds {
            break Outcome::Failure {
                reason: FailureReason::MaxRounds,
                rounds: history.len(),
                detail: None,
            };
        }
        let agent = if Role::speaker_at(t) == Role::Seller { seller } else { buyer };
        let reply = match generate_reply(agent, &history) {
            Ok(r) => r,
            Err(e) => {
                let detail = match e {
                    AgentError::Backend(b) => b.to_string(),
                    AgentError::Protocol(p) => p,
                };
                break Outcome::Failure {
                    reason: FailureReason::BackendError,
                    rounds: history.len(),
                    detail: Some(detail),
                };
            }
        };
        let utterance = Utterance {
            index: t,
            speaker: agent.role,
            text: reply.text,
        };
        let mut flags = TurnFlags {
            truncated: reply.truncated,
            ..TurnFlags::default()
        };
        let mut annotation = match detector.detect(&history, &utterance) {
            Ok(a) => a,
            Err(DetectorError::ParseFailure(msg)) => {
                log::debug!("detector parse failure at round {t}: {msg}");
                flags.detector_parse_failure = true;
                Annotation::chit_chat()
            }
            Err(DetectorError::Backend(e)) => {
                history.push(utterance.clone());
                turns.push(AnnotatedTurn {
                    utterance,
                    state: NegotiationState::ChitChat,
                    price: None,
                    strategy: None,
                    flags: TurnFlags {
                        detector_parse_failure: true,
                        ..flags
                    },
                });
                break Outcome::Failure {
                    reason: FailureReason::BackendError,
                    rounds: history.len(),
                    detail: Some(format!("detector: {e}")),
                };
            }
        };
        if annotation.state == NegotiationState::Offer && annotation.price.is_none() {
            flags.detector_parse_failure = true;
            annotation = Annotation::chit_chat();
        }
        if annotation.state == NegotiationState::Accept
            && annotation.price.is_none()
            && last_offer.is_none()
        {
            flags.accept_without_price = true;
            annotation.state = NegotiationState::Ponder;
        }

        let state = annotation.state;
        let deal_price = annotation.price.or(last_offer);
        if state == NegotiationState::Offer {
            last_offer = annotation.price;
        }
        history.push(utterance.clone());
        turns.push(AnnotatedTurn {
            utterance,
            state,
            price: annotation.price,
            strategy: annotation.strategy,
            flags,
        });

        match state {
            NegotiationState::Accept => {
                break Outcome::Success {
                    deal_price: deal_price.expect("accept downgraded when no price is known"),
                    rounds: t,
                }
            }
            NegotiationState::DealBreak => {
                break Outcome::Failure {
                    reason: FailureReason::DealBreak,
                    rounds: t,
                    detail: None,
                }
            }
            _ => {}
        }
    };

    Ok(DialogueRecord {
        id: String::new(),
        scenario: (*seller.scenario).clone(),
        seller_profile: seller.profile,
        buyer_profile: buyer.profile,
        seller_adjectives: seller.persona.adjectives.clone(),
        buyer_adjectives: buyer.persona.adjectives.clone(),
        turns,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn annotate(text: &str) -> Annotation {
        ScriptedDetector::default().annotate(text)
    }

    #[test]
    fn rule_detector_cases() {
        let a = annotate("I can do $60 [strategy: meet halfway]");
        assert_eq!(a.state, NegotiationState::Offer);
        assert_eq!(a.price, Some(60.0));
        assert_eq!(a.strategy.as_deref(), Some("meet halfway"));

        let a = annotate("no deal, goodbye");
        assert_eq!((a.state, a.price, a.strategy), (NegotiationState::DealBreak, None, None));

        assert_eq!(annotate("It was $80 but for you $75.").price, Some(75.0));
        let first = ScriptedDetector { price_pick: PricePick::First };
        assert_eq!(first.annotate("It was $80 but for you $75.").price, Some(80.0));

        assert_eq!(annotate("Hi, how can I help you?"), Annotation::chit_chat());
        assert_eq!(annotate("Its price is $80.").state, NegotiationState::Offer);
        assert_eq!(annotate("okay, it's a deal.").state, NegotiationState::Accept);
        assert_eq!(annotate("Could you please tell me the price?").state, NegotiationState::Ponder);
        assert_eq!(annotate("I can't accept $40.").state, NegotiationState::Offer);
        assert_eq!(annotate("I'm walking away from this deal").state, NegotiationState::DealBreak);
    }

    #[test]
    fn detector_reply_parsing() {
        let a = parse_detector_reply(&json!({"state": "Offer", "price": 80, "strategy": "seller-stated opening price"})).unwrap();
        assert_eq!((a.state, a.price), (NegotiationState::Offer, Some(80.0)));
        let a = parse_detector_reply(&json!({"state": "deal-break", "price": null, "strategy": ""})).unwrap();
        assert_eq!((a.state, a.price, a.strategy), (NegotiationState::DealBreak, None, None));
        let a = parse_detector_reply(&json!({"state": "Chit-chat", "price": "$1,200"})).unwrap();
        assert_eq!(a.price, Some(1200.0));
        assert!(parse_detector_reply(&json!({"state": "haggle"})).is_err());
        assert!(parse_detector_reply(&json!({"price": 3})).is_err());
        assert!(parse_detector_reply(&json!({"state": "offer", "price": null})).is_err());
        assert_eq!(parse_detector_reply(&json!({"state": "accept", "price": 0})).unwrap().price, None);
    }

    #[test]
    fn detector_prompt_lists_dialogue() {
        let ctx = [Utterance { index: 1, speaker: Role::Seller, text: SELLER_OPENER.into() }];
        let last = Utterance { index: 2, speaker: Role::Buyer, text: "Hello, I'm interested".into() };
        let p = render_detector_prompt(&ctx, &last);
        assert!(p.contains("strategy of the buyer by the end of the dialogue"));
        assert!(p.ends_with("seller: Hi, how can I help you?\nbuyer: Hello, I'm interested\n"));
    }

    #[test]
    fn state_labels() {
        assert_eq!(NegotiationState::parse_label("Deal-break"), Some(NegotiationState::DealBreak));
        assert_eq!(NegotiationState::parse_label("chit_chat"), Some(NegotiationState::ChitChat));
        assert_eq!(serde_json::to_string(&NegotiationState::DealBreak).unwrap(), "\"deal_break\"");
    }
}
