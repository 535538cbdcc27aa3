#![allow(dead_code)]

use std::path::{Path, PathBuf};

use bargain_cli::{BackendSpec, RunConfig};
use persona_bargain::{ConcessionPolicy, Dimension};

pub fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/scenarios.json")
}

pub fn scripted(seed: u64, dialogues: usize, out: &Path) -> RunConfig {
    let mut c = RunConfig::scripted(seed, scenarios(), dialogues, out);
    c.seller = BackendSpec::Scripted {
        policy: ConcessionPolicy::new(1.0, 12).with_trait_weight(Dimension::Agr, 1.2).with_patience(16),
    };
    c.buyer = BackendSpec::Scripted {
        policy: ConcessionPolicy::new(0.8, 14).with_patience(18),
    };
    c
}

/// Both sides stall forever, so every dialogue hits the round cap.
pub fn stalling(seed: u64, dialogues: usize, out: &Path) -> RunConfig {
    let mut c = RunConfig::scripted(seed, scenarios(), dialogues, out);
    c.seller = BackendSpec::Canned {
        replies: vec!["Let me think about that.".into()],
    };
    c.buyer = BackendSpec::Canned {
        replies: vec!["Tell me more about its condition.".into(), "Hmm.".into()],
    };
    c
}

pub fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}
