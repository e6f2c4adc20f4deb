use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser};

use nvtflow::config::{preset, RunConfig, PRESETS};
use nvtflow::driver::{run, RunOptions};
use nvtflow::scheme::SchemeKind;

/// Energy-stable simulation of multi-component two-phase flow with the
/// Peng-Robinson equation of state.
#[derive(Debug, Parser)]
#[command(name = "nvtflow", version, group(ArgGroup::new("source").required(true).args(["config", "preset"])))]
struct Cli {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in configuration.
    #[arg(long, value_name = "NAME", value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    preset: Option<String>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeKind>,
    #[arg(long, value_name = "N")]
    steps: Option<usize>,
    #[arg(long, value_name = "PATH")]
    output_dir: Option<PathBuf>,
    /// Snapshot cadence in steps (0 disables snapshots).
    #[arg(long, value_name = "N")]
    snapshot_every: Option<usize>,
    /// Energy-record cadence in steps.
    #[arg(long, value_name = "N")]
    energy_every: Option<usize>,
    /// Exit with status 4 when the modified total energy rises.
    #[arg(long)]
    strict_energy: bool,
}

fn load(cli: &Cli) -> nvtflow::error::Result<RunConfig> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => RunConfig::from_path(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => unreachable!("clap requires a source"),
    };
    if let Some(s) = cli.scheme {
        cfg.scheme = s;
    }
    if let Some(n) = cli.steps {
        cfg.steps = n;
    }
    if let Some(d) = &cli.output_dir {
        cfg.output.dir = d.clone();
    }
    if let Some(n) = cli.snapshot_every {
        cfg.output.snapshot_every = n;
    }
    if let Some(n) = cli.energy_every {
        cfg.output.energy_every = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let opts = RunOptions {
        strict_energy: cli.strict_energy,
        ..RunOptions::default()
    };
    match run(&cfg, &opts) {
        Ok(summary) => {
            let first = summary.records.first().map(|r| r.total_modified).unwrap_or(0.0);
            let last = summary.records.last().map(|r| r.total_modified).unwrap_or(0.0);
            println!(
                "{} steps in {:.2} s; modified total energy {first:.10e} -> {last:.10e} J/m; outputs in {}",
                summary.records.len() - 1,
                summary.seconds,
                cfg.output.dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
