//! Simulation and analysis of bargaining dialogues between LLM agents
//! conditioned on Big Five personality profiles.

pub mod agents;
pub mod analysis;
pub mod dialogue;
pub mod extract;
pub mod ipip;
pub mod llm;
pub mod metrics;
pub mod personality;
pub mod scenario;
pub mod stats;

pub use agents::{
    generate_reply, AgentConfig, CannedBackend, ChatBackend, ConcessionPolicy, GenerationBackend, GenerationRequest,
    Role, ScriptedBackend,
};
pub use dialogue::{
    run_negotiation, AnnotatedTurn, DialogueRecord, FailureReason, LlmDetector, NegotiationState, Outcome,
    ScriptedDetector, StateDetector, DEFAULT_MAX_ROUNDS,
};
pub use ipip::{validate_profiles, IpipInventory, LikertResponder, ScriptedFaithfulResponder};
pub use llm::{BackendError, ChatClient, ChatEndpoint};
pub use metrics::{metrics_row, summarize, CorpusSummary, MetricsRow};
pub use personality::{
    sample_profile, AdjectiveTable, Dimension, OrdinalEncoding, PersonaInstruction, PersonalityProfile, Polarity,
    TraitLevel,
};
pub use scenario::{derive_zone, Category, NegotiationScenario, Price, ZonePlacement};
