use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use offdiag_cli::{load_config, run_reporting, CliError, ExperimentConfig, Mode, Overrides, RunOptions};

#[derive(Parser)]
#[command(name = "offdiag", version, about = "Off-diagonal geometric phases from experiment configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run any config; the mode field selects the computation.
    Compute(Common),
    /// Nodal scan over an (ε, η) grid.
    Scan(Common),
    /// f(η, N) table and roots; runs with defaults when no config is given.
    Figure1(Common),
    /// Simulated two-arm interferogram and conditional circuit.
    Interfere(Common),
    /// Reduced acceptance checks; runs with defaults when no config is given.
    Selftest(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory [default: config `output`, else ./offdiag-out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps [default: all cores].
    #[arg(long)]
    workers: Option<usize>,
    /// Seed for randomized paths and checks.
    #[arg(long)]
    seed: Option<u64>,
    /// Integration steps.
    #[arg(long)]
    grid: Option<usize>,
    /// Nodal tolerance on |trace|.
    #[arg(long)]
    tol: Option<f64>,
}

fn prepare(verb: &str, expected: Option<Mode>, common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match (&common.config, expected) {
        (Some(path), _) => load_config(path)?,
        (None, Some(Mode::Figure1)) => ExperimentConfig::for_mode(Mode::Figure1),
        (None, Some(Mode::Selftest)) => {
            let mut cfg = ExperimentConfig::for_mode(Mode::Selftest);
            cfg.seed = Some(0);
            cfg
        }
        (None, _) => return Err(CliError::Schema(format!("`{verb}` needs --config"))),
    };
    if let Some(mode) = expected {
        if cfg.mode != mode {
            return Err(CliError::Schema(format!(
                "`{verb}` runs `{}` configs, got mode `{}`",
                mode.name(),
                cfg.mode.name()
            )));
        }
    }
    Overrides { seed: common.seed, grid: common.grid, tol: common.tol }.apply(&mut cfg)?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (verb, expected, common) = match &cli.command {
        Command::Compute(c) => ("compute", None, c),
        Command::Scan(c) => ("scan", Some(Mode::NodalScan), c),
        Command::Figure1(c) => ("figure1", Some(Mode::Figure1), c),
        Command::Interfere(c) => ("interfere", Some(Mode::Interfere), c),
        Command::Selftest(c) => ("selftest", Some(Mode::Selftest), c),
    };
    let cfg = prepare(verb, expected, common)?;
    let out_dir = common
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("offdiag-out"));
    let opts = RunOptions { out_dir: out_dir.clone(), workers: common.workers };
    let (report, status) = run_reporting(&cfg, &opts)?;
    for line in &report.summary {
        println!("{line}");
    }
    for name in &report.artifacts {
        println!("wrote {}", out_dir.join(name).display());
    }
    status
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
