//! Config loading and result files: metrics/trajectory CSV, final state,
//! cell snapshots and exit paths as JSON.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{ConfigError, NodeState, SimulationConfig, SimulationResult, Termination, TrajectoryRow};
use crate::environment::{build_scenario, EnvironmentError, EnvironmentSpec, ScenarioKind};
use crate::geometry::Point2;
use crate::metrics::MetricsRecord;
use crate::NodeId;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
    #[error("bad value in {file}: {reason}")]
    Parse { file: &'static str, reason: String },
}

/// Rounds to 9 significant digits, the precision written to CSV.
pub fn quantize(v: f64) -> f64 {
    if !v.is_finite() {
        return v;
    }
    format!("{v:.8e}").parse().expect("formatted float parses")
}

fn fmt_float(v: f64) -> String {
    quantize(v).to_string()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn parse_field<T: std::str::FromStr>(file: &'static str, name: &str, s: &str) -> Result<T, IoError>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| IoError::Parse { file, reason: format!("{name} `{s}`: {e}") })
}

fn parse_opt<T: std::str::FromStr>(file: &'static str, name: &str, s: &str) -> Result<Option<T>, IoError>
where
    T::Err: std::fmt::Display,
{
    if s.is_empty() {
        Ok(None)
    } else {
        parse_field(file, name, s).map(Some)
    }
}

fn create(path: &Path) -> Result<fs::File, IoError> {
    fs::File::create(path).map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

/// One line of `metrics.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub tick: u64,
    pub pac: f64,
    pub adt: Option<f64>,
    pub cdt: f64,
    pub u_a: Option<f64>,
    pub mean_velocity: f64,
    pub active_nodes: usize,
    pub injected_count: usize,
}

impl MetricsRow {
    /// The row as it reads back from disk.
    pub fn quantized(&self) -> Self {
        MetricsRow {
            pac: quantize(self.pac),
            adt: self.adt.map(quantize),
            cdt: quantize(self.cdt),
            u_a: self.u_a.map(quantize),
            mean_velocity: quantize(self.mean_velocity),
            ..self.clone()
        }
    }
}

impl From<&MetricsRecord> for MetricsRow {
    fn from(r: &MetricsRecord) -> Self {
        MetricsRow {
            tick: r.tick,
            pac: r.pac,
            adt: r.adt,
            cdt: r.cdt,
            u_a: r.u_a,
            mean_velocity: r.mean_velocity,
            active_nodes: r.active_nodes,
            injected_count: r.injected_count,
        }
    }
}

pub const METRICS_HEADER: [&str; 8] =
    ["tick", "pac", "adt", "cdt", "u_a", "mean_velocity", "active_nodes", "injected_count"];

pub fn write_metrics_csv<W: Write>(out: W, records: &[MetricsRecord]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for r in records {
        w.write_record([
            r.tick.to_string(),
            fmt_float(r.pac),
            fmt_opt(r.adt),
            fmt_float(r.cdt),
            fmt_opt(r.u_a),
            fmt_float(r.mean_velocity),
            r.active_nodes.to_string(),
            r.injected_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv<R: Read>(input: R) -> Result<Vec<MetricsRow>, IoError> {
    const F: &str = "metrics.csv";
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != METRICS_HEADER.len() {
            return Err(IoError::Parse { file: F, reason: format!("expected 8 fields, got {}", rec.len()) });
        }
        rows.push(MetricsRow {
            tick: parse_field(F, "tick", &rec[0])?,
            pac: parse_field(F, "pac", &rec[1])?,
            adt: parse_opt(F, "adt", &rec[2])?,
            cdt: parse_field(F, "cdt", &rec[3])?,
            u_a: parse_opt(F, "u_a", &rec[4])?,
            mean_velocity: parse_field(F, "mean_velocity", &rec[5])?,
            active_nodes: parse_field(F, "active_nodes", &rec[6])?,
            injected_count: parse_field(F, "injected_count", &rec[7])?,
        });
    }
    Ok(rows)
}

pub fn write_trajectory_csv<W: Write>(out: W, rows: &[TrajectoryRow]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tick", "id", "x", "y", "shift", "state"])?;
    for r in rows {
        w.write_record([
            r.tick.to_string(),
            r.id.to_string(),
            fmt_float(r.x),
            fmt_float(r.y),
            fmt_float(r.shift),
            r.state.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Vec<TrajectoryRow>, IoError> {
    const F: &str = "trajectory.csv";
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 6 {
            return Err(IoError::Parse { file: F, reason: format!("expected 6 fields, got {}", rec.len()) });
        }
        rows.push(TrajectoryRow {
            tick: parse_field(F, "tick", &rec[0])?,
            id: parse_field(F, "id", &rec[1])?,
            x: parse_field(F, "x", &rec[2])?,
            y: parse_field(F, "y", &rec[3])?,
            shift: parse_field(F, "shift", &rec[4])?,
            state: parse_field::<NodeState>(F, "state", &rec[5])?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalNode {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    pub state: NodeState,
    pub cumulative_distance: f64,
    pub cumulative_energy: f64,
    pub injected_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalState {
    pub scenario: String,
    pub seed: u64,
    pub sigma: f64,
    pub termination: Termination,
    pub tick: u64,
    pub injected_count: usize,
    pub pac: f64,
    pub adt: Option<f64>,
    pub cdt: f64,
    pub u_a: Option<f64>,
    pub connected: bool,
    pub nodes: Vec<FinalNode>,
}

impl FinalState {
    pub fn from_result(result: &SimulationResult) -> Self {
        let last = result.final_record();
        FinalState {
            scenario: result.scenario.scenario_tag(),
            seed: result.config.seed,
            sigma: result.config.sigma,
            termination: result.termination,
            tick: result.final_state.tick,
            injected_count: result.final_state.injected_count,
            pac: last.map_or(0.0, |r| r.pac),
            adt: last.and_then(|r| r.adt),
            cdt: last.map_or(0.0, |r| r.cdt),
            u_a: last.and_then(|r| r.u_a),
            connected: result.connected(),
            nodes: result
                .final_state
                .nodes
                .iter()
                .map(|n| FinalNode {
                    id: n.id,
                    x: n.position.x,
                    y: n.position.y,
                    state: n.state,
                    cumulative_distance: n.cumulative_distance,
                    cumulative_energy: n.cumulative_energy,
                    injected_at: n.injected_at,
                })
                .collect(),
        }
    }
}

pub fn path_to_json(path: &[Point2]) -> Vec<[f64; 2]> {
    path.iter().map(|p| [p.x, p.y]).collect()
}

/// Writes every artifact of a run into `dir` and returns the file paths.
pub fn write_run_outputs(dir: &Path, result: &SimulationResult) -> Result<Vec<PathBuf>, IoError> {
    fs::create_dir_all(dir).map_err(|source| IoError::File { path: dir.to_path_buf(), source })?;
    let mut written = Vec::new();

    let p = dir.join("metrics.csv");
    write_metrics_csv(create(&p)?, &result.metrics)?;
    written.push(p);

    let p = dir.join("trajectory.csv");
    write_trajectory_csv(create(&p)?, &result.trajectory)?;
    written.push(p);

    let p = dir.join("final_state.json");
    serde_json::to_writer_pretty(create(&p)?, &FinalState::from_result(result))?;
    written.push(p);

    for snap in &result.snapshots {
        let p = dir.join(format!("cells_{}.json", snap.tick));
        serde_json::to_writer(create(&p)?, &snap.cells)?;
        written.push(p);
    }
    for report in &result.faults {
        if let Some(path) = &report.exit_path {
            let p = dir.join(format!("exit_path_{}.json", report.node));
            serde_json::to_writer(create(&p)?, &path_to_json(path))?;
            written.push(p);
        }
    }
    if !result.faults.is_empty() {
        let p = dir.join("recovery.json");
        serde_json::to_writer_pretty(create(&p)?, &result.faults)?;
        written.push(p);
    }
    Ok(written)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: Option<String>,
    pub width: Option<f64>,
    pub height: Option<f64>,
    /// Layout seed for randomized scenarios; defaults to the run seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingSection {
    pub r_s: Option<f64>,
    pub r_c: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminationSection {
    pub tau: Option<f64>,
    pub c_max: Option<u32>,
    pub min_pac: Option<f64>,
    pub max_ticks: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionSection {
    pub point: Option<[f64; 2]>,
    pub offset: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    pub pac_grid_resolution: Option<f64>,
    pub occlude_coverage: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExitSection {
    pub r_avoid: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub snapshots: Option<Vec<u64>>,
}

/// On-disk run configuration. Every value is optional; missing ones take
/// the defaults scaled to the sensing range.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub sensing: SensingSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub termination: TerminationSection,
    #[serde(default)]
    pub injection: InjectionSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub exit: ExitSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Scenario description resolved from a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioChoice {
    pub kind: ScenarioKind,
    pub width: f64,
    pub height: f64,
    pub layout_seed: u64,
}

impl ScenarioChoice {
    pub fn build(&self) -> Result<EnvironmentSpec, EnvironmentError> {
        build_scenario(self.kind, self.width, self.height, self.layout_seed)
    }
}

impl ConfigFile {
    pub fn parse_toml(text: &str) -> Result<Self, IoError> {
        Ok(toml::from_str(text)?)
    }

    pub fn parse_json(text: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = fs::read_to_string(path).map_err(|source| IoError::File { path: path.to_path_buf(), source })?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::parse_json(&text)
        } else {
            Self::parse_toml(&text)
        }
    }

    /// Fills defaults and validates.
    pub fn resolve(&self) -> Result<(SimulationConfig, ScenarioChoice), ConfigError> {
        let r_s = self.sensing.r_s.unwrap_or(1.0);
        if !(r_s > 0.0 && r_s.is_finite()) {
            return Err(ConfigError { field: "sensing.r_s", reason: format!("{r_s} must be positive") });
        }
        let mut c = SimulationConfig::for_sensing_range(r_s);
        let t = &self.termination;
        c.r_c = self.sensing.r_c.unwrap_or(c.r_c);
        c.sigma = self.noise.sigma.unwrap_or(c.sigma);
        c.tau = t.tau.unwrap_or(c.tau);
        c.c_max = t.c_max.unwrap_or(c.c_max);
        c.min_pac = t.min_pac.unwrap_or(c.min_pac);
        c.max_ticks = t.max_ticks.unwrap_or(c.max_ticks);
        c.dt = self.dt.unwrap_or(c.dt);
        if let Some([x, y]) = self.injection.point {
            c.injection_point = Point2::new(x, y);
        }
        c.injection_offset = self.injection.offset.unwrap_or(c.injection_offset);
        c.seed = self.seed.unwrap_or(c.seed);
        c.pac_grid_resolution = self.metrics.pac_grid_resolution.unwrap_or(c.pac_grid_resolution);
        c.occlude_coverage = self.metrics.occlude_coverage.unwrap_or(c.occlude_coverage);
        c.r_avoid = self.exit.r_avoid.unwrap_or(c.r_avoid);
        c.validate().map_err(|e| ConfigError { field: section_of(e.field), reason: e.reason })?;

        let kind = match &self.scenario.kind {
            Some(k) => {
                k.parse::<ScenarioKind>().map_err(|e| ConfigError { field: "scenario.kind", reason: e.to_string() })?
            }
            None => ScenarioKind::Empty,
        };
        let width = self.scenario.width.unwrap_or(10.0);
        let height = self.scenario.height.unwrap_or(10.0);
        for (field, v) in [("scenario.width", width), ("scenario.height", height)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError { field, reason: format!("{v} must be positive") });
            }
        }
        if let Some(ticks) = &self.output.snapshots {
            if let Some(&t) = ticks.iter().find(|&&t| t > c.max_ticks) {
                return Err(ConfigError {
                    field: "output.snapshots",
                    reason: format!("tick {t} exceeds max_ticks = {}", c.max_ticks),
                });
            }
        }
        let layout_seed = self.scenario.seed.unwrap_or(c.seed);
        Ok((c, ScenarioChoice { kind, width, height, layout_seed }))
    }
}

fn section_of(field: &'static str) -> &'static str {
    match field {
        "r_s" => "sensing.r_s",
        "r_c" => "sensing.r_c",
        "sigma" => "noise.sigma",
        "tau" => "termination.tau",
        "c_max" => "termination.c_max",
        "min_pac" => "termination.min_pac",
        "max_ticks" => "termination.max_ticks",
        "injection_point" => "injection.point",
        "injection_offset" => "injection.offset",
        "pac_grid_resolution" => "metrics.pac_grid_resolution",
        "r_avoid" => "exit.r_avoid",
        other => other,
    }
}
