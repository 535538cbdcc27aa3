use std::path::PathBuf;
use std::process::ExitCode;

use bargain_cli::error::Result;
use bargain_cli::{analyze, price_length, read_corpus, run_ipip, simulate, AnalyzeOptions, RunConfig, SimulateOptions};
use clap::{Parser, Subcommand};
use persona_bargain::metrics::DEFAULT_LOG_FLOOR;

#[derive(Parser)]
#[command(name = "bargain", version, about = "Simulate and analyze personality-conditioned price negotiations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) a batch of dialogues into <output_dir>/dialogues.jsonl.
    Simulate {
        #[arg(short, long)]
        config: PathBuf,
        /// Resume into a corpus produced by a different config.
        #[arg(long)]
        force: bool,
    },
    /// Metrics, correlation grid, strategy regressions and dependence tests.
    Analyze {
        corpus: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Analyze a corpus that mixes config fingerprints.
        #[arg(long)]
        force: bool,
        /// Strategies must occur more often than this to enter a regression or table.
        #[arg(long, default_value_t = persona_bargain::analysis::DEFAULT_MIN_STRATEGY_COUNT)]
        min_strategy_count: usize,
        /// Leave deals outside both agents' ranges out of utility statistics.
        #[arg(long)]
        exclude_out_of_range: bool,
        /// Tab-separated `pattern<TAB>category` rules replacing the bundled map.
        #[arg(long)]
        strategy_map: Option<PathBuf>,
    },
    /// Administer the IPIP-50 inventory to sampled personas.
    Ipip {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Price versus dialogue length series, per category.
    Report {
        corpus: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, force } => {
            let config = RunConfig::load(&config)?;
            let m = simulate(&config, &SimulateOptions { force, stop_after: None })?;
            println!(
                "{}: {} requested, {} deals, {} failed, {} pending",
                m.corpus.display(),
                m.requested,
                m.completed,
                m.failed_total(),
                m.pending
            );
        }
        Command::Analyze {
            corpus,
            out,
            force,
            min_strategy_count,
            exclude_out_of_range,
            strategy_map,
        } => {
            let corpus = read_corpus(&corpus, force)?;
            let options = AnalyzeOptions {
                min_strategy_count,
                exclude_out_of_range,
                strategy_map,
                ..Default::default()
            };
            for path in analyze(&corpus, &options)?.write(&out)? {
                println!("{}", path.display());
            }
        }
        Command::Ipip { config } => {
            let config = RunConfig::load(&config)?;
            let (_, files) = run_ipip(&config)?;
            for path in files {
                println!("{}", path.display());
            }
        }
        Command::Report { corpus, out, force } => {
            let corpus = read_corpus(&corpus, force)?;
            for path in price_length(&corpus, DEFAULT_LOG_FLOOR)?.write(&out)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
