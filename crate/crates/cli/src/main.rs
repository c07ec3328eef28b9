use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cfr_cli::config::ExperimentConfig;
use cfr_cli::{cmd_bound, cmd_run, cmd_simulate, cmd_sweep_alpha, with_jobs};

#[derive(Parser)]
#[command(
    name = "cfr",
    about = "Counterfactual regression experiment harness",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (also the data directory for generated datasets).
    #[arg(long)]
    out: PathBuf,
    /// Worker count for realization-level parallelism.
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate realization CSVs and the generator metadata file.
    Simulate(CommonArgs),
    /// Select hyperparameters on held-out realizations, evaluate on the
    /// rest, and write results.csv.
    Run(CommonArgs),
    /// Sweep the balance penalty of one model over a list of alphas.
    SweepAlpha {
        #[command(flatten)]
        common: CommonArgs,
        /// Model name from the config to sweep.
        #[arg(long)]
        model: String,
        /// Comma-separated alpha values.
        #[arg(long, value_delimiter = ',')]
        alphas: Vec<f64>,
    },
    /// Evaluate the bound chain per realization and representation; exits
    /// nonzero when any chain or constants check is violated.
    Bound(CommonArgs),
}

fn load_config(common: &CommonArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_path(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.harness.master_seed = seed;
    }
    Ok(cfg)
}

fn run() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(common) => {
            let cfg = load_config(&common)?;
            cmd_simulate(&cfg, &common.out)?;
            println!(
                "wrote {} realizations to {}",
                cfg.total_realizations(),
                common.out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(common) => {
            let cfg = load_config(&common)?;
            let results = with_jobs(common.jobs, || cmd_run(&cfg, &common.out))?;
            for (model, params) in &results.selected {
                println!("{model}: selected {params}");
            }
            println!(
                "results written to {}",
                common.out.join("results.csv").display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::SweepAlpha {
            common,
            model,
            alphas,
        } => {
            let cfg = load_config(&common)?;
            let table = with_jobs(common.jobs, || {
                cmd_sweep_alpha(&cfg, &common.out, &model, &alphas)
            })?;
            for (alpha, metric, mean, se) in &table {
                println!("alpha={alpha} {metric}: {mean:.6} ± {se:.6}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Bound(common) => {
            let cfg = load_config(&common)?;
            let (rows, violations) = with_jobs(common.jobs, || cmd_bound(&cfg, &common.out))?;
            println!(
                "bound report: {} rows, {violations} violations ({})",
                rows.len(),
                common.out.join("bound.csv").display()
            );
            if violations > 0 {
                eprintln!("inequality chain violated on {violations} rows");
                return Ok(ExitCode::FAILURE);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
