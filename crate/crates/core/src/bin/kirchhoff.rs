//! Command-line runner. Every subcommand reads an optional TOML config,
//! applies `--set key=value` overrides and runs one experiment.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kirchhoff::config::{apply_overrides, set_key, ConfigError, ExperimentConfig, ExperimentKind};
use kirchhoff::runner::run_experiment;

#[derive(Parser)]
#[command(name = "kirchhoff", version, about = "Kirchhoff/NLS correspondence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out`).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, short)]
    jobs: Option<usize>,
    /// Random seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Config override `key=value` or `table.key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the manifest to stdout.
    #[arg(long)]
    print_manifest: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Radial ground state of `-Delta W + m W = W^{p-1}`.
    GroundState(Common),
    /// Structural conditions on `M`.
    CheckM(Common),
    /// Roots of `G(t) = M(t^{N-2} A) - t^2`.
    Roots(Common),
    /// `delta_eps` for each eps.
    DeltaEps(Common),
    /// Single-peak solutions with profiles.
    SinglePeak(Common),
    /// Stable zeros of the concentration field.
    Zeros(Common),
    /// Multi-peak eps sweep.
    MultiPeak(Common),
    /// Nonexistence threshold.
    Threshold(Common),
    /// Newton probes at constant potential.
    Probe(Common),
    /// eps sweep (single-peak unless the config asks for multipeak_sweep).
    Sweep(Common),
    /// Run whatever experiment the config names.
    Run(Common),
}

fn load(kind: Option<ExperimentKind>, sweep: bool, common: &Common) -> Result<ExperimentConfig, ConfigError> {
    let mut table = match &common.config {
        Some(path) => ExperimentConfig::read_table(path)?,
        None if kind.is_none() => return Err(ConfigError::Invalid("`run` needs --config".into())),
        None => toml::Table::new(),
    };
    let configured = table.get("experiment").and_then(|v| v.as_str()).map(str::to_string);
    let kind = if sweep && configured.as_deref() == Some("multipeak_sweep") {
        None
    } else {
        kind
    };
    if let Some(k) = kind {
        set_key(&mut table, "experiment", toml::Value::String(k.name().into()))?;
    }
    apply_overrides(&mut table, &common.set)?;
    if let Some(out) = &common.out {
        set_key(&mut table, "out", toml::Value::String(out.display().to_string()))?;
    }
    if let Some(seed) = common.seed {
        let seed = i64::try_from(seed).map_err(|_| ConfigError::Invalid(format!("seed {seed} too large")))?;
        set_key(&mut table, "seed", toml::Value::Integer(seed))?;
    }
    ExperimentConfig::from_table(table)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    use ExperimentKind as K;
    let (kind, sweep, common) = match &cli.command {
        Command::GroundState(c) => (Some(K::GroundState), false, c),
        Command::CheckM(c) => (Some(K::Conditions), false, c),
        Command::Roots(c) => (Some(K::Roots), false, c),
        Command::DeltaEps(c) => (Some(K::DeltaEps), false, c),
        Command::SinglePeak(c) => (Some(K::SinglePeak), false, c),
        Command::Zeros(c) => (Some(K::Zeros), false, c),
        Command::MultiPeak(c) => (Some(K::MultipeakSweep), false, c),
        Command::Threshold(c) => (Some(K::Threshold), false, c),
        Command::Probe(c) => (Some(K::Probe), false, c),
        Command::Sweep(c) => (Some(K::SinglePeakSweep), true, c),
        Command::Run(c) => (None, false, c),
    };
    let cfg = match load(kind, sweep, common) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = run_experiment(&cfg, common.jobs);
    if common.print_manifest {
        match serde_json::to_string_pretty(&outcome.manifest) {
            Ok(s) => println!("{s}"),
            Err(e) => eprintln!("error: {e}"),
        }
    }
    for c in outcome.manifest.checks.iter().filter(|c| !c.pass) {
        eprintln!("check failed: {} ({})", c.name, c.detail);
    }
    if let Some(e) = &outcome.manifest.error {
        eprintln!("error [{}]: {}", e.kind, e.message);
    }
    eprintln!(
        "{}: {} -> {}",
        outcome.manifest.experiment,
        outcome.manifest.status,
        outcome.dir.display()
    );
    ExitCode::from(outcome.exit_code)
}
