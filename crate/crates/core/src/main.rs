//! Command-line front end: run scenarios, sweep parameters, validate
//! configuration files, and print result tables.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use advswarm::harness::config::{ConfigError, ScenarioConfig};
use advswarm::harness::metrics::ticks_to_csv;
use advswarm::harness::runner::{run_scenario_with_seed, RunError};
use advswarm::harness::sweep::{sweep, SweepAxis, SweepReport};
use advswarm::RunSummary;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(
    name = "advswarm",
    about = "Multi-robot coordination simulator under adversarial perception",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write the tick CSV and summary JSON.
    Run {
        scenario: PathBuf,
        /// Override the master seed from the scenario file.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Re-run a scenario across one parameter axis.
    Sweep {
        scenario: PathBuf,
        /// Axis name: p, n_blocks, b, q, or seed.
        #[arg(long)]
        axis: SweepAxisArg,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        /// Runs with derived seeds per axis value.
        #[arg(long, default_value_t = 1)]
        seeds: usize,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check a scenario file and exit.
    Validate { scenario: PathBuf },
    /// Print the summaries found in an output directory as a text table.
    Report { dir: PathBuf },
}

#[derive(Clone)]
struct SweepAxisArg(SweepAxis);

impl std::str::FromStr for SweepAxisArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<SweepAxis>().map(SweepAxisArg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(RunError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(c) => CliError::Config(c),
            other => CliError::Run(other),
        }
    }
}

fn exit_code(e: &CliError) -> u8 {
    match e {
        CliError::Config(_) => EXIT_CONFIG,
        CliError::Run(_) => EXIT_NUMERIC,
        CliError::Io(_) => 1,
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            out,
        } => {
            let cfg = ScenarioConfig::load(&scenario)?;
            let seed = seed.unwrap_or(cfg.seed);
            let output = run_scenario_with_seed(&cfg, seed)?;
            std::fs::create_dir_all(&out)?;
            let csv_path = out.join(format!("{}.ticks.csv", cfg.name));
            let json_path = out.join(format!("{}.summary.json", cfg.name));
            std::fs::write(&csv_path, ticks_to_csv(&output.ticks))?;
            std::fs::write(&json_path, output.document().to_json())?;
            println!("{}", summary_line(&output.summary));
            println!("wrote {} and {}", csv_path.display(), json_path.display());
            Ok(())
        }
        Command::Sweep {
            scenario,
            axis,
            values,
            seeds,
            out,
        } => {
            let cfg = ScenarioConfig::load(&scenario)?;
            let report = sweep(&cfg, axis.0, &values, seeds)?;
            std::fs::create_dir_all(&out)?;
            let path = out.join(format!("{}.sweep_{}.json", cfg.name, report.axis));
            std::fs::write(&path, report.to_json())?;
            print!("{}", report.to_table());
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Validate { scenario } => {
            let cfg = ScenarioConfig::load(&scenario)?;
            println!(
                "ok: {} robots, horizon {}, seed {}",
                cfg.robots.len(),
                cfg.horizon,
                cfg.seed
            );
            Ok(())
        }
        Command::Report { dir } => {
            report_dir(&dir)?;
            Ok(())
        }
    }
}

fn summary_line(s: &RunSummary) -> String {
    format!(
        "{}: rms_xy={} sup||P||={:.4} sum||P||={:.2} missed={:.4} latency={:.4}",
        s.scenario,
        s.rms_pair_xy
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "n/a".into()),
        s.sup_cov_norm,
        s.sum_cov_norm,
        s.missed_fraction,
        s.mean_latency,
    )
}

/// Prints every run summary and sweep table found in a directory.
fn report_dir(dir: &Path) -> Result<(), CliError> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    entries.sort();
    if entries.is_empty() {
        println!("no result files in {}", dir.display());
        return Ok(());
    }
    let mut rows: Vec<RunSummary> = Vec::new();
    for path in &entries {
        let text = std::fs::read_to_string(path)?;
        if let Ok(doc) = serde_json::from_str::<advswarm::harness::metrics::RunDocument>(&text) {
            rows.push(doc.summary);
        } else if let Ok(report) = serde_json::from_str::<SweepReport>(&text) {
            print!("{}", report.to_table());
        }
    }
    if !rows.is_empty() {
        println!(
            "{:<24} {:>10} {:>12} {:>12} {:>10} {:>10}",
            "scenario", "rms_xy", "sup||P||", "sum||P||", "missed", "latency"
        );
        for s in rows {
            println!(
                "{:<24} {:>10} {:>12.4} {:>12.2} {:>10.4} {:>10.4}",
                s.scenario,
                s.rms_pair_xy
                    .map(|v| format!("{v:.4}"))
                    .unwrap_or_else(|| "n/a".into()),
                s.sup_cov_norm,
                s.sum_cov_norm,
                s.missed_fraction,
                s.mean_latency,
            );
        }
    }
    Ok(())
}
