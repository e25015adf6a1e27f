//! `smoothlab` experiment runner.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::ExperimentConfig;
use output::{Format, RunManifest, Timing};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] smoothlab::Error),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Io(_) => "io",
            CliError::Config(_) => "config",
            CliError::Engine(e) => e.kind(),
        }
    }
}

#[derive(Parser)]
#[command(name = "smoothlab", version, about = "Smoothing-transform fixed points and branching random walks in random environments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config (default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand, Clone, Copy, Debug)]
enum Command {
    /// Check the standing assumptions on the weight law.
    Validate,
    /// Moment conditions and the fixed-point verdict.
    Classify,
    /// Fixed-point iteration along one environment, with the convergence log.
    Iterate,
    /// Exact spine-walk convolutions and tail sums.
    Walk,
    /// Simulate the additive martingale of the branching random walk.
    BrwSim,
    /// Mean-one or degenerate verdict for each theta.
    BrwVerdict,
    /// Compare the grid iterate with exact tree enumeration.
    OracleCheck,
    /// Aggregate validation, classification and verdicts.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Classify => "classify",
            Command::Iterate => "iterate",
            Command::Walk => "walk",
            Command::BrwSim => "brw-sim",
            Command::BrwVerdict => "brw-verdict",
            Command::OracleCheck => "oracle-check",
            Command::Report => "report",
        }
    }
}

fn effective_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.out.is_some() {
        cfg.output_dir = cli.out.clone();
    }
    cfg.check_references()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn execute(cli: &Cli, cfg: &ExperimentConfig, dir: &Path) -> Result<bool, CliError> {
    let start = Instant::now();
    let outcome = match cli.command {
        Command::Validate => commands::validate(cfg),
        Command::Classify => commands::classify(cfg),
        Command::Iterate => commands::iterate(cfg),
        Command::Walk => commands::walk(cfg),
        Command::BrwSim => commands::brw_sim(cfg),
        Command::BrwVerdict => commands::brw_verdict(cfg),
        Command::OracleCheck => commands::oracle_check(cfg),
        Command::Report => commands::report(cfg),
    }?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut outputs = Vec::new();
    for a in &outcome.artifacts {
        outputs.push(output::write_file(dir, &a.file_name(cli.format), &a.render(cli.format))?);
    }
    // the output location does not enter the hash
    let hashed = ExperimentConfig { output_dir: None, ..cfg.clone() };
    let manifest = RunManifest {
        tool: "smoothlab",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cli.command.name().to_owned(),
        config_sha256: output::sha256_hex(&serde_json::to_vec(&hashed).expect("config serializes")),
        seed: cfg.seed,
        format: cli.format,
        outputs,
        timing: Timing { wall_seconds: start.elapsed().as_secs_f64() },
    };
    let manifest_json = serde_json::to_value(&manifest).expect("manifest serializes");
    output::write_file(dir, "manifest.json", &output::json_text(&manifest_json))?;
    println!("{}", json!({"subcommand": cli.command.name(), "ok": outcome.ok, "result": outcome.summary}));
    Ok(outcome.ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("{}", json!({"error": {"kind": "threads", "message": e.to_string()}}));
            return ExitCode::from(2);
        }
    }
    let cfg = effective_config(&cli);
    let dir = out_dir(&cli, cfg.as_ref().ok());
    let result = cfg.and_then(|cfg| execute(&cli, &cfg, &dir));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let record = json!({"error": {"kind": e.kind(), "message": e.to_string(), "subcommand": cli.command.name()}});
            println!("{record}");
            if std::fs::create_dir_all(&dir).is_ok() {
                let _ = std::fs::write(dir.join("error.json"), output::json_text(&record));
            }
            ExitCode::from(2)
        }
    }
}
