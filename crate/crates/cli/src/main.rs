use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use gnss_fgo::config::RunConfig;
use gnss_fgo::run::{compare, comparison_table, run, write_run, ComparisonRow};
use gnss_fgo::scenario_io::write_scenario;
use gnss_fgo_core::sim::{generate, ScenarioConfig};

#[derive(Parser)]
#[command(name = "gnss-fgo", version, about = "GNSS factor-graph estimation runs on synthetic scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario directory from a scenario config (TOML).
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Run one estimator configuration and write estimates and metrics.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run several configurations on a shared scenario and tabulate them.
    Compare {
        /// Repeat once per configuration.
        #[arg(long = "config")]
        configs: Vec<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the table here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn load(path: &Path, seed: Option<u64>) -> anyhow::Result<RunConfig> {
    let mut config = RunConfig::load(path)?;
    if let Some(seed) = seed {
        config.override_seed(seed);
    }
    Ok(config)
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate { config, seed, output } => {
            let mut cfg = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    toml::from_str::<ScenarioConfig>(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?
                }
                None => ScenarioConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.rng_seed = seed;
            }
            let scenario = generate(&cfg)?;
            write_scenario(&scenario, &output)?;
            log::info!("wrote {} epochs to {}", scenario.n_epochs(), output.display());
        }
        Command::Run { config, seed, output } => {
            let cfg = load(&config, seed)?;
            let out = run(&cfg)?;
            let dir = output
                .or_else(|| cfg.output.clone())
                .ok_or_else(|| anyhow::anyhow!("no output path: pass --output or set `output`"))?;
            write_run(&out, &dir)?;
            println!("{}", serde_json::to_string_pretty(&out.metrics)?);
        }
        Command::Compare { configs, seed, output } => {
            let cfgs = configs
                .iter()
                .map(|p| load(p, seed))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let outputs = compare(&cfgs)?;
            let rows: Vec<ComparisonRow> = outputs.iter().map(ComparisonRow::from).collect();
            let table = comparison_table(&rows);
            match output {
                Some(path) => std::fs::write(&path, &table).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{table}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
