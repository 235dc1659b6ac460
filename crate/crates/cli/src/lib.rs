//! Command implementations behind the `bison` binary.
//!
//! Each command returns the run's termination reason (or an error); the
//! binary maps that to the process exit status with [`exit_code`].

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use bison_core::engine::{parse_fault_plan, FaultPlanError};
use bison_core::exec::with_threads;
use bison_core::io::{write_run_outputs, ConfigFile, IoError};
use bison_core::sweep::{run_sweep, write_summary_csv, SweepSpec};
use bison_core::{
    ConfigError, EngineError, Execution, FaultEvent, RunOptions, Simulation, SimulationConfig, SimulationResult,
    Termination,
};

pub const SEED_ENV: &str = "BISON_SEED";

#[derive(Debug, Parser)]
#[command(name = "bison", version, about = "Incremental sensor-network deployment simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write its metrics, trajectory and final state.
    Run(RunArgs),
    /// Run every sigma × scenario × seed combination and write summary.csv.
    Sweep(SweepArgs),
    /// Converge, then apply a fault plan and report recovery.
    Faults(FaultsArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub fault_plan: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the Voronoi cells at this tick (repeatable).
    #[arg(long = "snapshot")]
    pub snapshots: Vec<u64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: Option<u32>,
}

#[derive(Debug, Args)]
pub struct FaultsArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub fault_plan: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{path}: {source}")]
    FaultPlan {
        path: PathBuf,
        #[source]
        source: FaultPlanError,
    },
}

impl CliError {
    fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        CliError::Config(ConfigError { field, reason: reason.into() })
    }
}

/// 0 for a settled network, 2 when the tick budget ran out.
pub fn exit_code(termination: Termination) -> u8 {
    match termination {
        Termination::Converged | Termination::CoverageStall => 0,
        Termination::TickLimit => 2,
        Termination::Continue => 1,
    }
}

/// Reads the seed override from the environment, if set.
pub fn seed_from_env() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse::<u64>().map(Some).map_err(|e| CliError::invalid(SEED_ENV, format!("`{v}`: {e}"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::invalid(SEED_ENV, e.to_string())),
    }
}

/// Everything needed to start one run.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config: SimulationConfig,
    pub env: bison_core::EnvironmentSpec,
    pub snapshots_at: Vec<u64>,
}

impl RunManifest {
    pub fn load(path: &Path, extra_snapshots: &[u64], seed: Option<u64>) -> Result<Self, CliError> {
        let mut file = ConfigFile::load(path)?;
        if seed.is_some() {
            file.seed = seed;
        }
        let (config, scenario) = file.resolve()?;
        let mut snapshots_at = file.output.snapshots.clone().unwrap_or_default();
        if let Some(t) = extra_snapshots.iter().find(|&&t| t > config.max_ticks) {
            return Err(CliError::invalid("--snapshot", format!("tick {t} exceeds max_ticks = {}", config.max_ticks)));
        }
        snapshots_at.extend_from_slice(extra_snapshots);
        snapshots_at.sort_unstable();
        snapshots_at.dedup();
        let env = scenario.build().map_err(EngineError::from)?;
        Ok(RunManifest { config, env, snapshots_at })
    }

    fn options(&self) -> RunOptions {
        RunOptions { snapshot_ticks: self.snapshots_at.clone(), ..RunOptions::default() }
    }
}

pub fn load_fault_plan(path: &Path) -> Result<Vec<FaultEvent>, CliError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::File { path: path.to_path_buf(), source })?;
    parse_fault_plan(&text).map_err(|source| CliError::FaultPlan { path: path.to_path_buf(), source })
}

fn summarize(result: &SimulationResult, out: &Path) {
    let last = result.final_record();
    println!(
        "{}: tick {} nodes {} pac {:.4} -> {}",
        result.termination,
        last.map_or(0, |r| r.tick),
        result.final_state.active_count(),
        result.final_pac(),
        out.display()
    );
}

pub fn cmd_run(args: &RunArgs, seed: Option<u64>) -> Result<Termination, CliError> {
    let manifest = RunManifest::load(&args.config, &args.snapshots, seed)?;
    let faults = match &args.fault_plan {
        Some(p) => load_fault_plan(p)?,
        None => Vec::new(),
    };
    let result = bison_core::run(&manifest.config, &manifest.env, &faults, &manifest.options())?;
    write_run_outputs(&args.out, &result)?;
    summarize(&result, &args.out);
    Ok(result.termination)
}

/// Rows go out in spec order; failed runs leave their metric columns blank
/// and carry the error text.
pub fn cmd_sweep(args: &SweepArgs) -> Result<Termination, CliError> {
    let spec = SweepSpec::load(&args.spec)?;
    let rows = match args.jobs {
        Some(n) => with_threads(n as usize, || run_sweep(&spec, Execution::Parallel)),
        None => run_sweep(&spec, Execution::default()),
    };
    fs::create_dir_all(&args.out).map_err(|source| IoError::File { path: args.out.clone(), source })?;
    let path = args.out.join("summary.csv");
    let file = fs::File::create(&path).map_err(|source| IoError::File { path: path.clone(), source })?;
    write_summary_csv(file, &rows)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    println!("{} runs, {failed} failed -> {}", rows.len(), path.display());
    Ok(Termination::Converged)
}

/// Runs without faults until the network first settles, then applies the
/// plan and keeps going until it settles again. Every fault must fall at
/// or after that first settling tick.
pub fn cmd_faults(args: &FaultsArgs, seed: Option<u64>) -> Result<Termination, CliError> {
    let manifest = RunManifest::load(&args.config, &[], seed)?;
    let faults = load_fault_plan(&args.fault_plan)?;
    if faults.is_empty() {
        return Err(CliError::invalid("fault_plan", "contains no events"));
    }
    let mut sim = Simulation::new(manifest.config.clone(), manifest.env.clone(), &manifest.options())?;
    while sim.termination() == Termination::Continue {
        sim.step()?;
    }
    let settled = sim.state().tick;
    if sim.termination() == Termination::TickLimit {
        return Err(CliError::invalid("fault_plan", format!("network never settled before max_ticks = {settled}")));
    }
    if let Some(e) = faults.iter().find(|e| e.tick < settled) {
        return Err(CliError::invalid(
            "fault_plan",
            format!("event at tick {} precedes initial convergence at tick {settled}", e.tick),
        ));
    }
    for e in &faults {
        sim.state().node(e.node)?;
    }
    let termination = sim.run_to_end(&faults)?;
    let result = sim.finish(termination);
    write_run_outputs(&args.out, &result)?;
    for f in &result.faults {
        let recovered = f.ticks_to_recover.map_or_else(|| "not recovered".to_string(), |t| format!("{t} ticks"));
        println!(
            "tick {} {} node {} ({}): pac {:.4} -> {:.4}, recovery {recovered}, cdt {:.4}",
            f.tick, f.action, f.node, f.class, f.pac_before, f.pac_at_fault, f.recovery_cdt
        );
    }
    summarize(&result, &args.out);
    Ok(result.termination)
}

pub fn dispatch(cli: &Cli) -> Result<Termination, CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a, seed_from_env()?),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Faults(a) => cmd_faults(a, seed_from_env()?),
    }
}
