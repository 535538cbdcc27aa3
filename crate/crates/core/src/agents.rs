//! Buyer and seller agents: role prompts, generation backends, scripted concession agents.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::dialogue::Utterance;
use crate::extract;
use crate::llm::{BackendError, ChatClient, ChatMessage, ChatRole};
use crate::metrics::scripted_price_path;
use crate::personality::{Dimension, OrdinalEncoding, PersonaInstruction, PersonalityProfile};
use crate::scenario::{NegotiationScenario, Price};

/// Fixed first utterance of every dialogue.
pub const SELLER_OPENER: &str = "Hi, how can I help you?";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Seller,
    Buyer,
}

impl Role {
    pub fn opponent(self) -> Role {
        match self {
            Role::Seller => Role::Buyer,
            Role::Buyer => Role::Seller,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::Seller => "seller",
            Role::Buyer => "buyer",
        }
    }

    /// Speaker of 1-based utterance `t`: the seller opens, then roles alternate.
    pub fn speaker_at(t: usize) -> Role {
        if t % 2 == 1 {
            Role::Seller
        } else {
            Role::Buyer
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("protocol violation: {0}")]
    Protocol(String),
}

fn personality_block(persona: &PersonaInstruction) -> String {
    format!(
        "You have following personality:\n{}\nReflect your personality in the negotiation process.",
        persona.list()
    )
}

pub fn render_buyer_prompt(scenario: &NegotiationScenario, persona: &PersonaInstruction) -> String {
    format!(
        "Act as a buyer and try to strike a deal for a {} with a lower price through conversation. \
         Your reply should not be too long. You would like to pay for {}. \
         You can accept a higher price if the item is really good or there are other perks.\n\n{}",
        scenario.product,
        scenario.buyer_ideal,
        personality_block(persona)
    )
}

pub fn render_seller_prompt(scenario: &NegotiationScenario, persona: &PersonaInstruction) -> String {
    format!(
        "Act as a seller that sells a {}, bargains with the buyer to get a higher deal price. \
         Your reply should not be too long. Your listing price for this item is {}. \
         The detail of the product is the following:\n{}\n\n{}",
        scenario.product,
        scenario.seller_ideal,
        scenario.description,
        personality_block(persona)
    )
}

pub fn render_prompt(role: Role, scenario: &NegotiationScenario, persona: &PersonaInstruction) -> String {
    match role {
        Role::Buyer => render_buyer_prompt(scenario, persona),
        Role::Seller => render_seller_prompt(scenario, persona),
    }
}

/// The part of a scenario one side is allowed to know.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivateView {
    pub role: Role,
    pub product: String,
    /// Only the seller sees the description.
    pub description: Option<String>,
    pub ideal: Price,
    pub reservation: Price,
}

impl PrivateView {
    pub fn of(role: Role, scenario: &NegotiationScenario) -> Self {
        match role {
            Role::Seller => PrivateView {
                role,
                product: scenario.product.clone(),
                description: Some(scenario.description.clone()),
                ideal: scenario.seller_ideal,
                reservation: scenario.seller_reservation,
            },
            Role::Buyer => PrivateView {
                role,
                product: scenario.product.clone(),
                description: None,
                ideal: scenario.buyer_ideal,
                reservation: scenario.buyer_reservation,
            },
        }
    }
}

pub type GenerationParams = BTreeMap<String, Value>;

/// Everything a backend receives for one reply.
#[derive(Debug, Clone)]
pub struct GenerationRequest<'a> {
    pub system_prompt: &'a str,
    pub history: &'a [Utterance],
    pub view: &'a PrivateView,
    pub profile: &'a PersonalityProfile,
    pub params: &'a GenerationParams,
}

impl GenerationRequest<'_> {
    pub fn role(&self) -> Role {
        self.view.role
    }

    /// Round index of the utterance being generated.
    pub fn round(&self) -> usize {
        self.history.len() + 1
    }
}

/// A text generator that produces one reply for an agent.
pub trait GenerationBackend: Send + Sync {
    /// Stable identifier recorded in run fingerprints.
    fn id(&self) -> String;

    fn generate(&self, request: &GenerationRequest<'_>) -> Result<String, BackendError>;
}

/// Maps the dialogue onto a chat-completion call: the role prompt is the
/// system message, own turns are `assistant`, the opponent's are `user`.
pub struct ChatBackend {
    client: ChatClient,
}

impl ChatBackend {
    pub fn new(client: ChatClient) -> Self {
        ChatBackend { client }
    }

    pub fn messages(request: &GenerationRequest<'_>) -> Vec<ChatMessage> {
        let mut messages = vec![ChatMessage::new(ChatRole::System, request.system_prompt)];
        for u in request.history {
            let role = if u.speaker == request.role() {
                ChatRole::Assistant
            } else {
                ChatRole::User
            };
            messages.push(ChatMessage::new(role, u.text.clone()));
        }
        messages
    }
}

impl GenerationBackend for ChatBackend {
    fn id(&self) -> String {
        format!("chat:{}@{}", self.client.endpoint().model, self.client.endpoint().url)
    }

    fn generate(&self, request: &GenerationRequest<'_>) -> Result<String, BackendError> {
        self.client.complete(&Self::messages(request))
    }
}

/// Replies with a fixed list of strings in turn order, cycling. The seller's
/// fixed opener does not consume a reply.
#[derive(Debug, Clone)]
pub struct CannedBackend {
    replies: Vec<String>,
}

impl CannedBackend {
    pub fn new<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        CannedBackend {
            replies: replies.into_iter().map(Into::into).collect(),
        }
    }
}

impl GenerationBackend for CannedBackend {
    fn id(&self) -> String {
        format!("canned:{}", self.replies.len())
    }

    fn generate(&self, request: &GenerationRequest<'_>) -> Result<String, BackendError> {
        if self.replies.is_empty() {
            return Err(BackendError::Refusal("no canned replies".into()));
        }
        let own_turns = request
            .history
            .iter()
            .filter(|u| u.speaker == request.role() && u.index > 1)
            .count();
        Ok(self.replies[own_turns % self.replies.len()].clone())
    }
}

/// Strategy labels a scripted agent attaches to its offers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyTags {
    /// Offer unchanged since the agent's previous one.
    pub firm: String,
    /// Step of at least `large_step` of the agent's price span.
    pub conceding: String,
    /// Any smaller movement.
    pub accommodating: String,
    pub opening: String,
    pub large_step: f64,
}

impl Default for StrategyTags {
    fn default() -> Self {
        StrategyTags {
            firm: "hold firm, take-it-or-leave-it".into(),
            conceding: "concede on price".into(),
            accommodating: "accommodate the other side".into(),
            opening: "emphasize value of the item".into(),
            large_step: 0.1,
        }
    }
}

/// Time-discounted offer policy for scripted agents.
///
/// At round `t` the agent's price is
/// `reservation + (ideal - reservation) * ((T - t) / T)^c` with horizon `T`.
/// The exponent is `base_exponent * exp(sum_d w_d * ordinal_d / 3)`, so trait
/// weights let personality shift how fast an agent concedes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcessionPolicy {
    pub base_exponent: f64,
    pub horizon: usize,
    #[serde(default)]
    pub trait_weights: BTreeMap<Dimension, f64>,
    /// Walk away instead of offering once the round reaches this value.
    #[serde(default)]
    pub patience: Option<usize>,
    #[serde(default)]
    pub tags: StrategyTags,
}

impl ConcessionPolicy {
    pub fn new(base_exponent: f64, horizon: usize) -> Self {
        ConcessionPolicy {
            base_exponent,
            horizon,
            trait_weights: BTreeMap::new(),
            patience: None,
            tags: StrategyTags::default(),
        }
    }

    pub fn with_trait_weight(mut self, dimension: Dimension, weight: f64) -> Self {
        self.trait_weights.insert(dimension, weight);
        self
    }

    pub fn with_patience(mut self, patience: usize) -> Self {
        self.patience = Some(patience);
        self
    }

    pub fn exponent_for(&self, profile: &PersonalityProfile) -> f64 {
        let enc = OrdinalEncoding::default();
        let shift: f64 = self
            .trait_weights
            .iter()
            .map(|(d, w)| w * enc.encode(profile.level(*d)) / 3.0)
            .sum();
        self.base_exponent * shift.exp()
    }

    /// Offer price at round `t` (rounds past the horizon stay at the reservation).
    pub fn price_at(&self, view: &PrivateView, exponent: f64, t: usize) -> f64 {
        scripted_price_path(
            view.reservation.to_f64(),
            view.ideal.to_f64(),
            exponent,
            self.horizon,
            t.min(self.horizon),
        )
    }
}

/// Deterministic agent following [`ConcessionPolicy`].
///
/// It accepts when the opponent's latest amount crosses its own current
/// price, walks away when patience runs out, and otherwise offers its price.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    policy: ConcessionPolicy,
}

impl ScriptedBackend {
    pub fn new(policy: ConcessionPolicy) -> Self {
        ScriptedBackend { policy }
    }

    pub fn policy(&self) -> &ConcessionPolicy {
        &self.policy
    }

    pub fn offer_text(role: Role, price: f64, tag: &str) -> String {
        match role {
            Role::Seller => format!("I can do ${price}. [strategy: {tag}]"),
            Role::Buyer => format!("How about ${price}? [strategy: {tag}]"),
        }
    }
}

pub const SCRIPTED_ACCEPT: &str = "Okay, it's a deal.";
pub const SCRIPTED_WALK_AWAY: &str = "No deal, I'm walking away.";

impl GenerationBackend for ScriptedBackend {
    fn id(&self) -> String {
        format!(
            "scripted:c={}:T={}",
            self.policy.base_exponent, self.policy.horizon
        )
    }

    fn generate(&self, request: &GenerationRequest<'_>) -> Result<String, BackendError> {
        let role = request.role();
        let t = request.round();
        let c = self.policy.exponent_for(request.profile);
        let own = self.policy.price_at(request.view, c, t);

        let opponent_offer = request
            .history
            .last()
            .filter(|u| u.speaker != role)
            .and_then(|u| extract::currency_amounts(&u.text).last().copied());
        if let Some(q) = opponent_offer {
            let crosses = match role {
                Role::Seller => q >= own,
                Role::Buyer => q <= own,
            };
            if crosses {
                return Ok(SCRIPTED_ACCEPT.to_string());
            }
        }
        if self.policy.patience.is_some_and(|p| t >= p) {
            return Ok(SCRIPTED_WALK_AWAY.to_string());
        }

        let previous = request
            .history
            .iter()
            .rev()
            .find(|u| u.speaker == role)
            .and_then(|u| extract::currency_amounts(&u.text).last().copied());
        let span = (request.view.ideal.to_f64() - request.view.reservation.to_f64()).abs();
        let tags = &self.policy.tags;
        let tag = match previous {
            None => &tags.opening,
            Some(p) if p == own => &tags.firm,
            Some(p) if span > 0.0 && (p - own).abs() / span >= tags.large_step => &tags.conceding,
            Some(_) => &tags.accommodating,
        };
        Ok(Self::offer_text(role, own, tag))
    }
}

/// One side of a negotiation.
#[derive(Clone)]
pub struct AgentConfig {
    pub role: Role,
    pub profile: PersonalityProfile,
    pub persona: PersonaInstruction,
    pub scenario: Arc<NegotiationScenario>,
    pub backend: Arc<dyn GenerationBackend>,
    pub params: GenerationParams,
    /// Hard ceiling on reply length in characters.
    pub max_reply_chars: Option<usize>,
}

impl fmt::Debug for AgentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AgentConfig")
            .field("role", &self.role)
            .field("profile", &self.profile.to_string())
            .field("backend", &self.backend.id())
            .finish_non_exhaustive()
    }
}

impl AgentConfig {
    pub fn new(
        role: Role,
        profile: PersonalityProfile,
        persona: PersonaInstruction,
        scenario: Arc<NegotiationScenario>,
        backend: Arc<dyn GenerationBackend>,
    ) -> Self {
        AgentConfig {
            role,
            profile,
            persona,
            scenario,
            backend,
            params: GenerationParams::new(),
            max_reply_chars: None,
        }
    }

    pub fn system_prompt(&self) -> String {
        render_prompt(self.role, &self.scenario, &self.persona)
    }

    pub fn private_view(&self) -> PrivateView {
        PrivateView::of(self.role, &self.scenario)
    }
}

/// A generated reply, possibly cut at the length ceiling.
#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub text: String,
    pub truncated: bool,
}

/// Cuts `text` to at most `limit` chars, preferring the last sentence end.
pub fn truncate_reply(text: &str, limit: usize) -> (String, bool) {
    if text.chars().count() <= limit {
        return (text.to_string(), false);
    }
    let head: String = text.chars().take(limit).collect();
    let cut = head
        .char_indices()
        .filter(|(_, c)| matches!(c, '.' | '!' | '?'))
        .map(|(i, c)| i + c.len_utf8())
        .next_back();
    let out = match cut {
        Some(end) => head[..end].to_string(),
        None => head,
    };
    (out.trim_end().to_string(), true)
}

/// Produces the agent's next utterance text given the dialogue so far.
pub fn generate_reply(agent: &AgentConfig, history: &[Utterance]) -> Result<Reply, AgentError> {
    let expected = Role::speaker_at(history.len() + 1);
    if expected != agent.role {
        return Err(AgentError::Protocol(format!(
            "round {} belongs to the {expected}, not the {}",
            history.len() + 1,
            agent.role
        )));
    }
    if history.is_empty() {
        return Ok(Reply {
            text: SELLER_OPENER.to_string(),
            truncated: false,
        });
    }
    if history[0].text != SELLER_OPENER {
        return Err(AgentError::Protocol("dialogue must open with the seller greeting".into()));
    }
    let system_prompt = agent.system_prompt();
    let view = agent.private_view();
    let request = GenerationRequest {
        system_prompt: &system_prompt,
        history,
        view: &view,
        profile: &agent.profile,
        params: &agent.params,
    };
    let raw = agent.backend.generate(&request)?;
    let raw = raw.trim();
    if raw.is_empty() {
        return Err(AgentError::Backend(BackendError::Refusal("empty reply".into())));
    }
    let (text, truncated) = match agent.max_reply_chars {
        Some(limit) => truncate_reply(raw, limit),
        None => (raw.to_string(), false),
    };
    Ok(Reply { text, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::personality::{Degree, Polarity, TraitLevel};
    use crate::scenario::{ZonePlacement, default_zone_fraction};

    fn persona() -> PersonaInstruction {
        PersonaInstruction::new(vec!["very friendly".into(), "a bit stingy".into()]).unwrap()
    }

    fn speaker_scenario() -> NegotiationScenario {
        NegotiationScenario::new(
            "Stereo Speaker",
            "Magnavox speaker with gold tone finish",
            50.into(),
            30.into(),
            default_zone_fraction(),
            ZonePlacement::Centered,
        )
        .unwrap()
    }

    #[test]
    fn buyer_prompt_layout() {
        let s = speaker_scenario();
        let text = render_buyer_prompt(&s, &persona());
        assert!(text.contains("strike a deal for a Stereo Speaker"));
        assert!(text.contains("pay for 30"));
        let objective = text.find("Act as a buyer").unwrap();
        let block = text.find("You have following personality:").unwrap();
        assert!(objective < block);
        assert!(text.ends_with("very friendly, a bit stingy\nReflect your personality in the negotiation process."));
        assert_eq!(text, render_buyer_prompt(&s, &persona()));
        for hidden in ["50", "33", "47"] {
            assert!(!text.contains(hidden), "buyer prompt leaks {hidden}");
        }
    }

    #[test]
    fn seller_prompt_layout() {
        let s = NegotiationScenario::new("iPhone 5S", "Like-new condition, 16GB.", 160.into(), 144.into(), default_zone_fraction(), ZonePlacement::Centered).unwrap();
        let text = render_seller_prompt(&s, &persona());
        assert!(text.contains("listing price for this item is 160"));
        assert!(text.contains("\nLike-new condition, 16GB.\n"));
        for hidden in ["144", "146.4", "157.6"] {
            assert!(!text.contains(hidden), "seller prompt leaks {hidden}");
        }
    }

    #[test]
    fn private_view_hides_opponent() {
        let s = speaker_scenario();
        let b = PrivateView::of(Role::Buyer, &s);
        assert_eq!((b.ideal, b.reservation), (30.into(), 47.into()));
        assert!(b.description.is_none());
        let v = PrivateView::of(Role::Seller, &s);
        assert_eq!((v.ideal, v.reservation), (50.into(), 33.into()));
    }

    fn agent(role: Role, backend: Arc<dyn GenerationBackend>) -> AgentConfig {
        AgentConfig::new(
            role,
            PersonalityProfile::uniform(TraitLevel::new(Polarity::Positive, Degree::Low)),
            persona(),
            Arc::new(speaker_scenario()),
            backend,
        )
    }

    fn utt(index: usize, text: &str) -> Utterance {
        Utterance {
            index,
            speaker: Role::speaker_at(index),
            text: text.into(),
        }
    }

    #[test]
    fn buyer_never_opens() {
        let a = agent(Role::Buyer, Arc::new(CannedBackend::new(["x"])));
        assert!(matches!(generate_reply(&a, &[]), Err(AgentError::Protocol(_))));
        let s = agent(Role::Seller, Arc::new(CannedBackend::new(["x"])));
        assert_eq!(generate_reply(&s, &[]).unwrap().text, SELLER_OPENER);
        assert!(generate_reply(&s, &[utt(1, SELLER_OPENER)]).is_err());
    }

    #[test]
    fn canned_backend_echo() {
        let a = agent(Role::Buyer, Arc::new(CannedBackend::new(["canned string"])));
        let r = generate_reply(&a, &[utt(1, SELLER_OPENER)]).unwrap();
        assert_eq!(r.text, "canned string");
        let empty = agent(Role::Buyer, Arc::new(CannedBackend::new(["  "])));
        assert!(matches!(
            generate_reply(&empty, &[utt(1, SELLER_OPENER)]),
            Err(AgentError::Backend(BackendError::Refusal(_)))
        ));
    }

    #[test]
    fn scripted_offer_follows_price_path() {
        let policy = ConcessionPolicy::new(1.0, 10);
        let a = agent(Role::Buyer, Arc::new(ScriptedBackend::new(policy)));
        let r = generate_reply(&a, &[utt(1, SELLER_OPENER)]).unwrap();
        // buyer at t=2: 47 + (30 - 47) * 0.8 = 33.4
        let expected = scripted_price_path(47.0, 30.0, 1.0, 10, 2);
        assert_eq!(extract::currency_amounts(&r.text), vec![expected]);
        assert!((expected - 33.4).abs() < 1e-12);
        assert_eq!(extract::strategy_tag(&r.text).unwrap(), StrategyTags::default().opening);
    }

    #[test]
    fn scripted_accepts_crossing_offer() {
        let a = agent(Role::Seller, Arc::new(ScriptedBackend::new(ConcessionPolicy::new(1.0, 10))));
        let h = [utt(1, SELLER_OPENER), utt(2, "How about $49?")];
        assert_eq!(generate_reply(&a, &h).unwrap().text, SCRIPTED_ACCEPT);
        let h = [utt(1, SELLER_OPENER), utt(2, "How about $35?")];
        assert!(generate_reply(&a, &h).unwrap().text.starts_with("I can do $"));
    }

    #[test]
    fn patience_triggers_walk_away() {
        let a = agent(Role::Buyer, Arc::new(ScriptedBackend::new(ConcessionPolicy::new(1.0, 10).with_patience(2))));
        assert_eq!(generate_reply(&a, &[utt(1, SELLER_OPENER)]).unwrap().text, SCRIPTED_WALK_AWAY);
    }

    #[test]
    fn trait_weight_scales_exponent() {
        let p = ConcessionPolicy::new(1.0, 20).with_trait_weight(Dimension::Agr, 3.0f64.ln());
        let mut prof = PersonalityProfile::uniform(TraitLevel::new(Polarity::Positive, Degree::High));
        assert!((p.exponent_for(&prof) - 3.0).abs() < 1e-12);
        prof.set(Dimension::Agr, TraitLevel::new(Polarity::Negative, Degree::High));
        assert!((p.exponent_for(&prof) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn truncation_at_sentence_boundary() {
        let (t, cut) = truncate_reply("One. Two three four.", 10);
        assert_eq!((t.as_str(), cut), ("One.", true));
        let (t, cut) = truncate_reply("abcdefghijkl", 5);
        assert_eq!((t.as_str(), cut), ("abcde", true));
        let (t, cut) = truncate_reply("short", 50);
        assert_eq!((t.as_str(), cut), ("short", false));
    }

    #[test]
    fn chat_messages_map_roles() {
        let s = speaker_scenario();
        let view = PrivateView::of(Role::Buyer, &s);
        let prof = PersonalityProfile::uniform(TraitLevel::ALL[0]);
        let params = GenerationParams::new();
        let history = [utt(1, SELLER_OPENER), utt(2, "hello"), utt(3, "$40")];
        let req = GenerationRequest {
            system_prompt: "sys",
            history: &history,
            view: &view,
            profile: &prof,
            params: &params,
        };
        let m = ChatBackend::messages(&req);
        let roles: Vec<ChatRole> = m.iter().map(|x| x.role).collect();
        assert_eq!(roles, vec![ChatRole::System, ChatRole::User, ChatRole::Assistant, ChatRole::User]);
    }
}
