use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand};

use gptrade::experiment::{
    cmd_backtest, cmd_enrich, cmd_evolve, cmd_report, CliError, ExperimentSpec, RowSelection,
    DEFAULT_OUT, OUT_ENV,
};
use gptrade::variants::Variant;

#[derive(Parser)]
#[command(name = "gptrade", version, about = "Evolve and evaluate GP trading agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Add indicator columns to a raw OHLCV file and drop the warm-up rows.
    Enrich {
        input: PathBuf,
        output: PathBuf,
    },
    /// Run multi-seed evolutions and write one directory per run.
    Evolve(EvolveArgs),
    /// Replay a saved champion over a data file.
    Backtest {
        champion: PathBuf,
        data: PathBuf,
        /// train, test, all, or START..END (row indices of the enriched table)
        #[arg(long, default_value = "test")]
        rows: RowSelection,
        /// Write the per-row ledger here as CSV.
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
    /// Compare methods from a run index.
    Report {
        /// index.json written by `evolve`, or the output root containing it.
        index: PathBuf,
        /// Directory for the report CSVs (default: <root>/report).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct EvolveArgs {
    /// Data files (raw OHLCV or enriched). Added to those in --config.
    data: Vec<PathBuf>,
    /// key = value experiment file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    /// Comma-separated subset of GP, VGP, CVGP, STVGP.
    #[arg(long, value_delimiter = ',')]
    variant: Vec<Variant>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
    /// Runs executed concurrently.
    #[arg(long)]
    jobs: Option<usize>,
}

impl EvolveArgs {
    fn into_spec(self) -> anyhow::Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => ExperimentSpec::from_file(path)?,
            None => ExperimentSpec {
                out: PathBuf::from(DEFAULT_OUT),
                ..ExperimentSpec::default()
            },
        };
        spec.datasets.extend(self.data);
        if let Some(seed) = self.seed {
            spec.base_seed = seed;
        }
        if let Some(runs) = self.runs {
            spec.runs = runs;
        }
        if !self.variant.is_empty() {
            spec.variants = self.variant;
        }
        if let Some(p) = self.population {
            spec.config.population_size = p;
            spec.config.tournament_size = spec.config.tournament_size.min(p);
        }
        if let Some(g) = self.generations {
            spec.config.generations = g;
        }
        if let Some(out) = self.out {
            spec.out = out;
        }
        if let Some(jobs) = self.jobs {
            spec.jobs = jobs;
        }
        Ok(spec)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Enrich { input, output } => {
            let rows = cmd_enrich(&input, &output)?;
            println!("wrote {rows} rows to {}", output.display());
        }
        Command::Evolve(args) => {
            let spec = args.into_spec().map_err(CliError::Input)?;
            let outcome = cmd_evolve(&spec)?;
            println!(
                "{} runs complete ({} reused) in {}",
                outcome.completed.len(),
                outcome.reused,
                spec.out.display()
            );
        }
        Command::Backtest {
            champion,
            data,
            rows,
            ledger,
        } => {
            let r = cmd_backtest(&champion, &data, &rows, ledger.as_deref())?;
            println!("roi = {}", r.roi);
            println!("win_rate = {}", r.win_rate);
            println!("n_trades = {}", r.n_trades);
            println!("fitness = {}", r.fitness);
        }
        Command::Report { index, out } => {
            let index = if index.is_dir() {
                index.join("index.json")
            } else {
                index
            };
            if !Path::new(&index).is_file() {
                return Err(CliError::Input(anyhow!("no index at {}", index.display())));
            }
            for report in cmd_report(&index, out.as_deref())? {
                println!("{}:", report.dataset);
                for path in [Some(&report.quartiles), report.pvalues.as_ref(), report.ranks.as_ref()]
                    .into_iter()
                    .flatten()
                {
                    println!("  {}", path.display());
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
