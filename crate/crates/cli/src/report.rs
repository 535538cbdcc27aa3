use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use persona_bargain::analysis::{price_length_report, PriceLengthReport};
use persona_bargain::stats::RankCorrelation;
use persona_bargain::{metrics_row, MetricsRow};

use crate::analyze::{json, write_all};
use crate::corpus::Corpus;
use crate::error::{CliError, Result};

/// Price against dialogue length, as data series for plotting. Word counts
/// are whitespace-delimited tokens over every utterance of a dialogue.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceLength {
    pub fingerprint: String,
    pub rows: Vec<MetricsRow>,
    pub report: PriceLengthReport,
}

pub fn price_length(corpus: &Corpus, log_floor: f64) -> Result<PriceLength> {
    if corpus.records.is_empty() {
        return Err(CliError::runtime("empty corpus"));
    }
    let rows = corpus
        .records
        .iter()
        .map(|r| metrics_row(r, log_floor).map_err(|e| CliError::Runtime(format!("dialogue {}: {e}", r.id))))
        .collect::<Result<Vec<_>>>()?;
    let report = price_length_report(&rows).map_err(CliError::runtime)?;
    Ok(PriceLength {
        fingerprint: corpus.fingerprint.clone(),
        rows,
        report,
    })
}

fn corr_cell(c: &Option<RankCorrelation>) -> String {
    match c {
        Some(c) => format!("{:.3} (p = {:.4}, n = {})", c.rho, c.p_value, c.n),
        None => "n/a".to_string(),
    }
}

impl PriceLength {
    pub fn series_csv(&self) -> String {
        let mut out = String::from("fingerprint,dialogue_id,category,success,price,log_price,rounds,words\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.fingerprint,
                r.dialogue_id,
                r.category.map_or("uncategorized", |c| c.name()),
                r.success,
                r.seller_ideal,
                r.seller_ideal.ln(),
                r.rounds,
                r.word_count
            );
        }
        out
    }

    pub fn categories_csv(&self) -> String {
        let mut out = String::from("fingerprint,category,dialogues,mean_price,mean_log_price,mean_rounds,mean_words\n");
        for c in &self.report.categories {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                self.fingerprint, c.category, c.dialogues, c.mean_price, c.mean_log_price, c.mean_rounds, c.mean_word_count
            );
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let r = &self.report;
        let mut out = String::from("# Price and negotiation length\n\n");
        let _ = writeln!(out, "Corpus fingerprint: `{}`\n", self.fingerprint);
        out.push_str("Pearson correlation over all dialogues. Words are whitespace-delimited tokens.\n\n");
        out.push_str("| | Rounds | Words |\n|---|---|---|\n");
        let _ = writeln!(out, "| Price | {} | {} |", corr_cell(&r.price_vs_rounds), corr_cell(&r.price_vs_words));
        let _ = writeln!(
            out,
            "| log(price) | {} | {} |",
            corr_cell(&r.log_price_vs_rounds),
            corr_cell(&r.log_price_vs_words)
        );
        out.push_str("\n| Category | Dialogues | Mean price | Mean log price | Mean rounds | Mean words |\n");
        out.push_str("|---|---:|---:|---:|---:|---:|\n");
        for c in &r.categories {
            let _ = writeln!(
                out,
                "| {} | {} | {:.2} | {:.3} | {:.2} | {:.1} |",
                c.category, c.dialogues, c.mean_price, c.mean_log_price, c.mean_rounds, c.mean_word_count
            );
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
        write_all(
            dir,
            vec![
                ("price_length.csv", self.series_csv()),
                ("categories.csv", self.categories_csv()),
                (
                    "price_length.json",
                    json(&serde_json::json!({ "fingerprint": self.fingerprint, "report": self.report }))?,
                ),
                ("price_length.md", self.to_markdown()),
            ],
        )
    }
}
