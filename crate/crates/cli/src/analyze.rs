use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use persona_bargain::analysis::{
    dependence_grid, strategy_regression, RegressionTarget, StrategyRegression, TraitStrategyDependence,
    DEFAULT_MIN_STRATEGY_COUNT,
};
use persona_bargain::metrics::DEFAULT_LOG_FLOOR;
use persona_bargain::stats::{stars, trait_metric_table, GridOptions, StrategyMap, TraitMetricGrid, TraitObservation};
use persona_bargain::{metrics_row, summarize, CorpusSummary, MetricsRow, Role};
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{CliError, Result};

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub min_strategy_count: usize,
    pub exclude_out_of_range: bool,
    /// Strategy mapping file; the bundled map when `None`.
    pub strategy_map: Option<PathBuf>,
    pub log_floor: f64,
    pub grid: GridOptions,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            min_strategy_count: DEFAULT_MIN_STRATEGY_COUNT,
            exclude_out_of_range: false,
            strategy_map: None,
            log_floor: DEFAULT_LOG_FLOOR,
            grid: GridOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionOutcome {
    pub target: RegressionTarget,
    pub regression: Option<StrategyRegression>,
    pub error: Option<String>,
}

/// Everything `analyze` computes. A pure function of the corpus and options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub fingerprint: String,
    pub rows: Vec<MetricsRow>,
    pub summary: CorpusSummary,
    pub grid: Option<TraitMetricGrid>,
    /// Why the grid is missing, when it is.
    pub grid_note: Option<String>,
    pub regressions: Vec<RegressionOutcome>,
    pub dependence: Vec<TraitStrategyDependence>,
}

pub const REGRESSION_TARGETS: [RegressionTarget; 3] = [
    RegressionTarget::Joint,
    RegressionTarget::Intrinsic(Role::Seller),
    RegressionTarget::Intrinsic(Role::Buyer),
];

pub fn load_strategy_map(path: Option<&Path>) -> Result<StrategyMap> {
    match path {
        None => Ok(StrategyMap::bundled()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            StrategyMap::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
    }
}

pub fn analyze(corpus: &Corpus, options: &AnalyzeOptions) -> Result<Analysis> {
    let map = load_strategy_map(options.strategy_map.as_deref())?;
    let rows = corpus
        .records
        .iter()
        .map(|r| metrics_row(r, options.log_floor).map_err(|e| CliError::Runtime(format!("dialogue {}: {e}", r.id))))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&rows).map_err(CliError::runtime)?;

    let observations: Vec<TraitObservation<'_>> = corpus
        .records
        .iter()
        .zip(&rows)
        .map(|(r, row)| TraitObservation {
            row,
            seller: &r.seller_profile,
            buyer: &r.buyer_profile,
        })
        .collect();
    let grid_options = GridOptions {
        exclude_out_of_range: options.exclude_out_of_range,
        ..options.grid
    };
    let (grid, grid_note) = match trait_metric_table(&observations, &grid_options) {
        Ok(g) => (Some(g), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let regressions = REGRESSION_TARGETS
        .iter()
        .map(|&target| {
            match strategy_regression(
                &corpus.records,
                &rows,
                &map,
                target,
                options.min_strategy_count,
                options.exclude_out_of_range,
            ) {
                Ok(r) => RegressionOutcome {
                    target,
                    regression: Some(r),
                    error: None,
                },
                Err(e) => RegressionOutcome {
                    target,
                    regression: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let dependence = dependence_grid(&corpus.records, &map, options.min_strategy_count);

    Ok(Analysis {
        fingerprint: corpus.fingerprint.clone(),
        rows,
        summary,
        grid,
        grid_note,
        regressions,
        dependence,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(CliError::runtime)?;
    for r in rows {
        w.write_record(&r).map_err(CliError::runtime)?;
    }
    let bytes = w.into_inner().map_err(CliError::runtime)?;
    String::from_utf8(bytes).map_err(CliError::runtime)
}

/// Prepends a constant fingerprint column to CSV text whose fields never
/// need quoting.
pub(crate) fn with_fingerprint(csv: &str, fingerprint: &str) -> String {
    let mut out = String::with_capacity(csv.len() + 80 * csv.lines().count());
    for (i, line) in csv.lines().enumerate() {
        out.push_str(if i == 0 { "fingerprint" } else { fingerprint });
        out.push(',');
        out.push_str(line);
        out.push('\n');
    }
    out
}

impl Analysis {
    pub fn metrics_csv(&self) -> Result<String> {
        let header = [
            "fingerprint",
            "dialogue_id",
            "category",
            "success",
            "failure_reason",
            "rounds",
            "deal_price",
            "seller_utility",
            "buyer_utility",
            "joint_utility",
            "seller_concession",
            "buyer_concession",
            "seller_offers",
            "buyer_offers",
            "out_of_range",
            "seller_ideal",
            "word_count",
        ];
        csv_text(
            &header,
            self.rows.iter().map(|r| {
                vec![
                    self.fingerprint.clone(),
                    r.dialogue_id.clone(),
                    r.category.map(|c| c.name().to_string()).unwrap_or_default(),
                    r.success.to_string(),
                    r.failure_reason.map(|f| f.name().to_string()).unwrap_or_default(),
                    r.rounds.to_string(),
                    opt(r.deal_price),
                    opt(r.seller_utility),
                    opt(r.buyer_utility),
                    opt(r.joint_utility),
                    opt(r.seller_concession),
                    opt(r.buyer_concession),
                    r.seller_offers.to_string(),
                    r.buyer_offers.to_string(),
                    r.out_of_range.to_string(),
                    r.seller_ideal.to_string(),
                    r.word_count.to_string(),
                ]
            }),
        )
    }

    pub fn regressions_csv(&self) -> Result<String> {
        let mut rows = Vec::new();
        for o in &self.regressions {
            let Some(reg) = &o.regression else { continue };
            let label = o.target.label();
            let n = reg.result.n.to_string();
            let r2 = reg.result.r_squared.to_string();
            let mut push = |term: &str, coef: Option<f64>, uses: Option<usize>| {
                rows.push(vec![
                    self.fingerprint.clone(),
                    label.clone(),
                    term.to_string(),
                    opt(coef),
                    uses.map(|u| u.to_string()).unwrap_or_default(),
                    n.clone(),
                    r2.clone(),
                ]);
            };
            push("(intercept)", Some(reg.result.intercept), None);
            for (name, b) in &reg.result.coefficients {
                push(name, Some(*b), reg.counts.get(name).copied());
            }
            for name in &reg.result.dropped {
                push(name, None, reg.counts.get(name).copied());
            }
        }
        csv_text(&["fingerprint", "target", "term", "coefficient", "uses", "n", "r_squared"], rows)
    }

    pub fn dependence_csv(&self) -> Result<String> {
        let rows = self.dependence.iter().map(|d| {
            let (stat, dof, p) = match &d.result {
                Some(r) => (r.statistic.to_string(), r.dof.to_string(), r.p_value.to_string()),
                None => Default::default(),
            };
            vec![
                self.fingerprint.clone(),
                d.role.name().to_string(),
                d.dimension.code().to_string(),
                d.table.row_labels.join(";"),
                stat,
                dof,
                p,
                d.error.clone().unwrap_or_default(),
            ]
        });
        csv_text(
            &["fingerprint", "role", "dimension", "strategies", "chi_square", "dof", "p_value", "error"],
            rows,
        )
    }

    pub fn to_markdown(&self) -> String {
        let s = &self.summary;
        let mut out = String::from("# Negotiation analysis\n\n");
        let _ = writeln!(out, "Corpus fingerprint: `{}`\n", self.fingerprint);
        out.push_str("## Outcomes\n\n");
        out.push_str("| Dialogues | Deals | Success rate | Avg rounds (deals) | Out-of-range deals | Mean joint utility |\n");
        out.push_str("|---:|---:|---:|---:|---:|---:|\n");
        let _ = writeln!(
            out,
            "| {} | {} | {:.3} | {} | {} | {} |\n",
            s.dialogues,
            s.successes,
            s.success_rate,
            s.avg_rounds.map_or("n/a".into(), |v| format!("{v:.2}")),
            s.out_of_range,
            s.mean_joint_utility.map_or("n/a".into(), |v| format!("{v:.3}")),
        );
        if !s.failures.is_empty() {
            let parts: Vec<String> = s.failures.iter().map(|(k, v)| format!("{k} {v}")).collect();
            let _ = writeln!(out, "Failures: {}\n", parts.join(", "));
        }
        out.push_str("| Category | Dialogues | Deals | Success rate | Avg rounds |\n|---|---:|---:|---:|---:|\n");
        for (name, g) in &s.by_category {
            let _ = writeln!(
                out,
                "| {name} | {} | {} | {:.3} | {} |",
                g.dialogues,
                g.successes,
                g.success_rate,
                g.avg_rounds.map_or("n/a".into(), |v| format!("{v:.2}"))
            );
        }

        out.push_str("\n## Personality and negotiation metrics\n\n");
        out.push_str("Spearman correlation between each agent's trait level and the metric. * p < 0.1, ** p < 0.05.\n\n");
        match (&self.grid, &self.grid_note) {
            (Some(g), _) => out.push_str(&g.to_markdown()),
            (None, note) => {
                let _ = writeln!(out, "Not computed: {}", note.as_deref().unwrap_or("no data"));
            }
        }

        out.push_str("\n## Strategy regressions\n");
        for o in &self.regressions {
            let _ = writeln!(out, "\n### {}\n", o.target.label());
            let Some(reg) = &o.regression else {
                let _ = writeln!(out, "Not computed: {}", o.error.as_deref().unwrap_or("unknown"));
                continue;
            };
            let _ = writeln!(out, "n = {}, R² = {:.3}\n", reg.result.n, reg.result.r_squared);
            out.push_str("| Strategy | Uses | Coefficient |\n|---|---:|---:|\n");
            let _ = writeln!(out, "| (intercept) | | {:.4} |", reg.result.intercept);
            for (name, b) in &reg.result.coefficients {
                let _ = writeln!(out, "| {name} | {} | {b:.4} |", reg.counts.get(name).copied().unwrap_or(0));
            }
            for name in &reg.result.dropped {
                let _ = writeln!(out, "| {name} | {} | collinear |", reg.counts.get(name).copied().unwrap_or(0));
            }
        }

        out.push_str("\n## Personality and strategy dependence\n\n");
        if self.dependence.is_empty() {
            out.push_str("Not computed: too few frequent strategies.\n");
        } else {
            out.push_str("| Role | Dimension | Strategies | χ² | dof | p |\n|---|---|---:|---:|---:|---:|\n");
            for d in &self.dependence {
                match &d.result {
                    Some(r) => {
                        let _ = writeln!(
                            out,
                            "| {} | {} | {} | {:.3} | {} | {:.4}{} |",
                            d.role.name(),
                            d.dimension.code(),
                            d.table.row_labels.len(),
                            r.statistic,
                            r.dof,
                            r.p_value,
                            stars(r.p_value, &[0.05])
                        );
                    }
                    None => {
                        let _ = writeln!(
                            out,
                            "| {} | {} | {} | n/a | | {} |",
                            d.role.name(),
                            d.dimension.code(),
                            d.table.row_labels.len(),
                            d.error.as_deref().unwrap_or("")
                        );
                    }
                }
            }
        }
        out
    }

    /// Writes every artifact into `dir` and returns their paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
        let mut files = vec![
            ("metrics.csv", self.metrics_csv()?),
            ("summary.json", json(&serde_json::json!({ "fingerprint": self.fingerprint, "summary": self.summary }))?),
            ("regressions.csv", self.regressions_csv()?),
            (
                "regressions.json",
                json(&serde_json::json!({ "fingerprint": self.fingerprint, "regressions": self.regressions }))?,
            ),
            ("dependence.csv", self.dependence_csv()?),
            (
                "dependence.json",
                json(&serde_json::json!({ "fingerprint": self.fingerprint, "tables": self.dependence }))?,
            ),
            ("report.md", self.to_markdown()),
        ];
        if let Some(g) = &self.grid {
            files.push(("trait_grid.csv", with_fingerprint(&g.to_csv(), &self.fingerprint)));
            files.push(("trait_grid.md", format!("Corpus fingerprint: `{}`\n\n{}", self.fingerprint, g.to_markdown())));
        }
        write_all(dir, files)
    }
}

pub(crate) fn json(value: &serde_json::Value) -> Result<String> {
    serde_json::to_string_pretty(value).map(|s| s + "\n").map_err(CliError::runtime)
}

pub(crate) fn write_all(dir: &Path, files: Vec<(&str, String)>) -> Result<Vec<PathBuf>> {
    files
        .into_iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            Ok(path)
        })
        .collect()
}
