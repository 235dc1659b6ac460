//! Parameter sweeps over noise level × scenario × seed.
//!
//! Runs are independent; with parallel execution they fan out across
//! threads, and rows are always collected in spec order.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{run, ConfigError, EngineError, RunOptions, SimulationConfig, SimulationResult};
use crate::environment::{build_scenario, ScenarioKind};
use crate::exec::Execution;
use crate::io::{quantize, ConfigFile, IoError};
use crate::metrics::ticks_to_fraction;

pub const DEFAULT_SIGMAS: [f64; 4] = [0.0, 0.01, 0.05, 0.1];
pub const DEFAULT_MAX_RUNS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub sigmas: Option<Vec<f64>>,
    pub scenarios: Vec<String>,
    pub seeds: Vec<u64>,
    pub max_runs: Option<usize>,
    #[serde(default)]
    pub base: ConfigFile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub sigmas: Vec<f64>,
    pub scenarios: Vec<ScenarioKind>,
    pub seeds: Vec<u64>,
    pub base_config: SimulationConfig,
    pub width: f64,
    pub height: f64,
    pub max_runs: usize,
}

/// One cell of the sweep matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub sigma: f64,
    pub scenario: ScenarioKind,
    pub seed: u64,
}

impl SweepSpec {
    pub fn new(
        sigmas: Vec<f64>,
        scenarios: Vec<ScenarioKind>,
        seeds: Vec<u64>,
        base_config: SimulationConfig,
        width: f64,
        height: f64,
    ) -> Result<Self, ConfigError> {
        let spec = SweepSpec { sigmas, scenarios, seeds, base_config, width, height, max_runs: DEFAULT_MAX_RUNS };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |field, reason: String| Err(ConfigError { field, reason });
        if self.sigmas.is_empty() {
            return err("sigmas", "must not be empty".into());
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return err("sigmas", format!("{s} must be non-negative"));
        }
        if self.scenarios.is_empty() {
            return err("scenarios", "must not be empty".into());
        }
        if self.seeds.is_empty() {
            return err("seeds", "must not be empty".into());
        }
        let total = self.sigmas.len() * self.scenarios.len() * self.seeds.len();
        if total > self.max_runs {
            return err("max_runs", format!("{total} runs exceed the cap of {}", self.max_runs));
        }
        self.base_config.validate()
    }

    pub fn from_file(file: &SweepFile) -> Result<Self, ConfigError> {
        let (base_config, scenario) = file.base.resolve()?;
        let scenarios = file
            .scenarios
            .iter()
            .map(|s| s.parse::<ScenarioKind>().map_err(|e| ConfigError { field: "scenarios", reason: e.to_string() }))
            .collect::<Result<_, _>>()?;
        let spec = SweepSpec {
            sigmas: file.sigmas.clone().unwrap_or_else(|| DEFAULT_SIGMAS.to_vec()),
            scenarios,
            seeds: file.seeds.clone(),
            base_config,
            width: scenario.width,
            height: scenario.height,
            max_runs: file.max_runs.unwrap_or(DEFAULT_MAX_RUNS),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| IoError::File { path: path.to_path_buf(), source })?;
        let file: SweepFile = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text)?
        };
        Ok(Self::from_file(&file)?)
    }

    /// The matrix in spec order: sigma, then scenario, then seed.
    pub fn runs(&self) -> Vec<SweepRun> {
        let mut out = Vec::new();
        for &sigma in &self.sigmas {
            for &scenario in &self.scenarios {
                for &seed in &self.seeds {
                    out.push(SweepRun { sigma, scenario, seed });
                }
            }
        }
        out
    }

    pub fn config_for(&self, r: &SweepRun) -> SimulationConfig {
        SimulationConfig { sigma: r.sigma, seed: r.seed, ..self.base_config.clone() }
    }

    /// Runs one matrix cell; the scenario layout uses the run's seed.
    pub fn execute(&self, r: &SweepRun, exec: Execution) -> Result<SimulationResult, EngineError> {
        let env = build_scenario(r.scenario, self.width, self.height, r.seed)?;
        let options = RunOptions { exec, record_trajectory: false, ..RunOptions::default() };
        run(&self.config_for(r), &env, &[], &options)
    }

    /// Every run's full result, in spec order. Individual runs go
    /// sequential inside so that only the outer level fans out.
    pub fn execute_all(&self, exec: Execution) -> Vec<(SweepRun, Result<SimulationResult, EngineError>)> {
        let runs = self.runs();
        let results = exec.map(&runs, |r| self.execute(r, Execution::Sequential));
        runs.into_iter().zip(results).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sigma: f64,
    pub scenario: String,
    pub seed: u64,
    pub final_pac: Option<f64>,
    pub final_adt: Option<f64>,
    pub final_cdt: Option<f64>,
    pub final_u_a: Option<f64>,
    pub nodes: Option<usize>,
    pub ticks_to_85pct: Option<u64>,
    pub ticks_to_90pct: Option<u64>,
    pub termination: Option<String>,
    pub error: Option<String>,
}

impl SummaryRow {
    pub fn from_outcome(run: &SweepRun, outcome: &Result<SimulationResult, EngineError>) -> Self {
        let mut row = SummaryRow {
            sigma: run.sigma,
            scenario: run.scenario.to_string(),
            seed: run.seed,
            final_pac: None,
            final_adt: None,
            final_cdt: None,
            final_u_a: None,
            nodes: None,
            ticks_to_85pct: None,
            ticks_to_90pct: None,
            termination: None,
            error: None,
        };
        match outcome {
            Ok(res) => {
                let last = res.final_record();
                row.final_pac = last.map(|r| r.pac);
                row.final_adt = last.and_then(|r| r.adt);
                row.final_cdt = last.map(|r| r.cdt);
                row.final_u_a = last.and_then(|r| r.u_a);
                row.nodes = Some(res.final_state.active_count());
                row.ticks_to_85pct = ticks_to_fraction(&res.metrics, 0.85);
                row.ticks_to_90pct = ticks_to_fraction(&res.metrics, 0.90);
                row.termination = Some(res.termination.to_string());
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        row
    }
}

pub const SUMMARY_HEADER: [&str; 12] = [
    "sigma",
    "scenario",
    "seed",
    "final_pac",
    "final_adt",
    "final_cdt",
    "final_u_a",
    "nodes",
    "ticks_to_85pct",
    "ticks_to_90pct",
    "termination",
    "error",
];

pub fn write_summary_csv<W: Write>(out: W, rows: &[SummaryRow]) -> Result<(), IoError> {
    let f = |v: Option<f64>| v.map(|x| quantize(x).to_string()).unwrap_or_default();
    let i = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            quantize(r.sigma).to_string(),
            r.scenario.clone(),
            r.seed.to_string(),
            f(r.final_pac),
            f(r.final_adt),
            f(r.final_cdt),
            f(r.final_u_a),
            i(r.nodes.map(|n| n as u64)),
            i(r.ticks_to_85pct),
            i(r.ticks_to_90pct),
            r.termination.clone().unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the whole sweep and returns its summary rows in spec order.
pub fn run_sweep(spec: &SweepSpec, exec: Execution) -> Vec<SummaryRow> {
    spec.execute_all(exec).iter().map(|(r, o)| SummaryRow::from_outcome(r, o)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> SweepSpec {
        let base = SimulationConfig { max_ticks: 60, ..SimulationConfig::default() };
        SweepSpec::new(vec![0.0, 0.1], vec![ScenarioKind::Empty, ScenarioKind::Pillars(2)], vec![1, 2], base, 5.0, 5.0)
            .unwrap()
    }

    #[test]
    fn matrix_order_and_cap() {
        let spec = small_spec();
        let runs = spec.runs();
        assert_eq!(runs.len(), 8);
        assert_eq!(runs[0], SweepRun { sigma: 0.0, scenario: ScenarioKind::Empty, seed: 1 });
        assert_eq!(runs[7], SweepRun { sigma: 0.1, scenario: ScenarioKind::Pillars(2), seed: 2 });
        let mut capped = spec.clone();
        capped.max_runs = 7;
        assert_eq!(capped.validate().unwrap_err().field, "max_runs");
        let mut empty = spec;
        empty.seeds.clear();
        assert_eq!(empty.validate().unwrap_err().field, "seeds");
    }

    #[test]
    fn parallel_sweep_matches_sequential() {
        let spec = small_spec();
        assert_eq!(run_sweep(&spec, Execution::Parallel), run_sweep(&spec, Execution::Sequential));
    }

    #[test]
    fn failing_run_is_recorded_and_sweep_continues() {
        let base = SimulationConfig { max_ticks: 20, ..SimulationConfig::default() };
        // Fifty pillars do not fit in a 5 m room, so those rows carry the error.
        let spec =
            SweepSpec::new(vec![0.0], vec![ScenarioKind::Pillars(50), ScenarioKind::Empty], vec![1], base, 5.0, 5.0)
                .unwrap();
        let rows = run_sweep(&spec, Execution::Sequential);
        assert!(rows[0].error.is_some() && rows[0].final_pac.is_none());
        assert!(rows[1].error.is_none() && rows[1].final_pac.is_some());
        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with(&SUMMARY_HEADER.join(",")));
    }
}
