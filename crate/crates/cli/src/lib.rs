//! Batch simulation, analysis and reporting for persona-conditioned
//! negotiation experiments. The binary in `main.rs` is a thin clap wrapper
//! over the functions here.

pub mod analyze;
pub mod config;
pub mod corpus;
pub mod error;
pub mod ipip;
pub mod report;
pub mod simulate;

pub use analyze::{analyze, Analysis, AnalyzeOptions};
pub use config::{BackendSpec, DetectorSpec, IpipSettings, ResponderSpec, RunConfig};
pub use corpus::{read_corpus, Corpus, CorpusLine, CORPUS_FILE};
pub use error::CliError;
pub use ipip::run_ipip;
pub use report::{price_length, PriceLength};
pub use simulate::{simulate, RunManifest, SimulateOptions, MANIFEST_FILE};
