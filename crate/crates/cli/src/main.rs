//! `medsim`: estimate standard errors of sample medians, simulate
//! meta-analytic datasets, and run coverage-probability grids.

mod manifest;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use medsim_core::config::{parse_config, RunConfig};
use medsim_core::engine::{metasims, EngineOptions};
use medsim_core::estimators::{g_cauchy, g_exp, g_lnorm, g_norm, EstimatorId};
use medsim_core::output::{write_summary_csv, write_summary_json, write_trial_log};
use medsim_core::rng::trial_stream;
use medsim_core::simulate::sim_stats;
use medsim_core::stats::round_sig;
use serde_json::json;

use crate::manifest::{RunArgs, RunManifest};

/// Trials per cell when neither the flag nor the config sets them.
const DEFAULT_TRIALS: usize = 100;

#[derive(Parser)]
#[command(
    name = "medsim",
    version,
    about = "Coverage simulations for standard errors of the sample median"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Standard error of a sample median from reported summaries.
    Estimate(EstimateArgs),
    /// Write one simulated meta-analytic dataset as CSV.
    Simulate(SimulateArgs),
    /// Run a coverage-probability grid.
    Coverage(CoverageArgs),
    /// Re-run a command from its manifest.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    estimator: String,
    #[arg(long, allow_negative_numbers = true)]
    n: i64,
    #[arg(long, allow_negative_numbers = true)]
    median: f64,
    #[arg(long, allow_negative_numbers = true)]
    q1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    q3: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Master seed; falls back to MEDSIM_SEED, then to the config's `seed`.
    #[arg(long, env = "MEDSIM_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Grid cell to simulate.
    #[arg(long, default_value_t = 0)]
    cell: u32,
    /// Trial stream to draw from; trial t reproduces the data of that
    /// coverage trial.
    #[arg(long, default_value_t = 0)]
    trial: u32,
}

#[derive(Args)]
struct CoverageArgs {
    #[arg(long)]
    config: PathBuf,
    /// Trials per cell; defaults to the config's `trials`, then 100.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, env = "MEDSIM_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Suppress per-cell progress on standard error.
    #[arg(long)]
    no_progress: bool,
    /// Route every cell through the single-study trial.
    #[arg(long)]
    single_study: bool,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output path (simulate) or directory (coverage); defaults to the
    /// manifest's.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate(args) => cmd_estimate(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Coverage(args) => cmd_coverage(args),
        Command::Replay(args) => cmd_replay(args),
    }
}

fn load(path: &Path) -> Result<RunConfig> {
    parse_config(path).with_context(|| format!("invalid config {}", path.display()))
}

fn resolve_seed(flag: Option<u64>, config: &RunConfig) -> Result<u64> {
    flag.or(config.seed)
        .ok_or_else(|| anyhow!("no seed given: pass --seed, set MEDSIM_SEED, or add \"seed\" to the config"))
}

fn cmd_estimate(args: EstimateArgs) -> Result<()> {
    let id: EstimatorId = args.estimator.parse()?;
    let quartiles = || -> Result<(f64, f64)> {
        match (args.q1, args.q3) {
            (Some(q1), Some(q3)) => Ok((q1, q3)),
            _ => bail!("{id} needs --q1 and --q3"),
        }
    };
    let est = match id {
        EstimatorId::GExp => g_exp(args.n, args.median)?,
        EstimatorId::GNorm => {
            let (q1, q3) = quartiles()?;
            g_norm(args.n, args.median, q1, q3)?
        }
        EstimatorId::GLnorm => {
            let (q1, q3) = quartiles()?;
            g_lnorm(args.n, args.median, q1, q3)?
        }
        EstimatorId::GCauchy => {
            let (q1, q3) = quartiles()?;
            g_cauchy(args.n, args.median, q1, q3)?
        }
    };
    let doc = json!({
        "estimator": id,
        "se": round_sig(est.se),
        "assumed_family": est.assumed_family,
        "fitted_params": est.fitted_params.iter().map(|&p| round_sig(p)).collect::<Vec<_>>(),
    });
    println!("{}", serde_json::to_string(&doc)?);
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let started = manifest::now();
    let config = load(&args.config)?;
    let seed = resolve_seed(args.seed, &config)?;
    let cell = config.grid.get(args.cell as usize).ok_or_else(|| {
        anyhow!(
            "--cell {} out of range: grid has {} cell(s)",
            args.cell,
            config.grid.len()
        )
    })?;
    let mut rng = trial_stream(seed, args.cell, args.trial);
    let sample = sim_stats(cell, &mut rng)?;
    let mut out = create(&args.out)?;
    sample.write_csv(&mut out)?;
    out.flush()?;

    RunManifest {
        command: "simulate".into(),
        config_path: manifest::absolute(&args.config),
        master_seed: seed,
        output: args.out.clone(),
        engine_version: medsim_core::ENGINE_VERSION.into(),
        started_at: started,
        finished_at: manifest::now(),
        defaulted: config.defaulted.clone(),
        args: RunArgs {
            cell: Some(args.cell),
            trial: Some(args.trial),
            ..RunArgs::default()
        },
    }
    .write(&manifest::path_for_file(&args.out))
}

fn cmd_coverage(args: CoverageArgs) -> Result<()> {
    let started = manifest::now();
    let config = load(&args.config)?;
    let seed = resolve_seed(args.seed, &config)?;
    let trials = args.trials.or(config.trials).unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        bail!("--trials must be >= 1");
    }
    let opts = EngineOptions {
        workers: args.workers,
        progress: !args.no_progress,
        single_study: args.single_study,
    };
    let report = metasims(&config.grid, trials, seed, opts)?;

    fs::create_dir_all(&args.out_dir).with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    let mut w = create(&args.out_dir.join("summary.csv"))?;
    write_summary_csv(&report, &mut w)?;
    w.flush()?;
    let mut w = create(&args.out_dir.join("summary.json"))?;
    write_summary_json(&report, &config.defaulted, &mut w)?;
    w.flush()?;
    let mut w = create(&args.out_dir.join("trials.csv"))?;
    write_trial_log(&report, &mut w)?;
    w.flush()?;

    RunManifest {
        command: "coverage".into(),
        config_path: manifest::absolute(&args.config),
        master_seed: seed,
        output: args.out_dir.clone(),
        engine_version: medsim_core::ENGINE_VERSION.into(),
        started_at: started,
        finished_at: manifest::now(),
        defaulted: config.defaulted.clone(),
        args: RunArgs {
            trials: Some(trials),
            single_study: args.single_study,
            workers: Some(args.workers),
            ..RunArgs::default()
        },
    }
    .write(&args.out_dir.join("manifest.json"))
}

fn cmd_replay(args: ReplayArgs) -> Result<()> {
    let m = RunManifest::read(&args.manifest)?;
    if m.engine_version != medsim_core::ENGINE_VERSION {
        eprintln!(
            "warning: manifest was written by engine {}, running {}",
            m.engine_version,
            medsim_core::ENGINE_VERSION
        );
    }
    let output = args.out.unwrap_or(m.output);
    match m.command.as_str() {
        "simulate" => cmd_simulate(SimulateArgs {
            config: m.config_path,
            seed: Some(m.master_seed),
            out: output,
            cell: m.args.cell.unwrap_or(0),
            trial: m.args.trial.unwrap_or(0),
        }),
        "coverage" => cmd_coverage(CoverageArgs {
            config: m.config_path,
            trials: m.args.trials,
            seed: Some(m.master_seed),
            out_dir: output,
            no_progress: true,
            single_study: m.args.single_study,
            workers: m.args.workers.unwrap_or(0),
        }),
        other => bail!("manifest names unknown command `{other}`"),
    }
}
