//! Shared pieces of the acceptance harness: timed batches of runs, small
//! statistics, coverage of sub-regions and path measurements.

use std::fmt;
use std::time::{Duration, Instant};

use bison_core::engine::classify_node;
use bison_core::metrics::CoverageGrid;
use bison_core::sweep::{SweepRun, SweepSpec};
use bison_core::{
    EngineError, EnvironmentSpec, Execution, NodeClass, NodeId, Point2, SimulationResult, SimulationState,
};

/// One criterion's outcome, printed as a single line.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub id: &'static str,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{} {tag}  {}: {}", self.id, self.title, self.detail)
    }
}

pub struct TimedRun {
    pub run: SweepRun,
    pub outcome: Result<SimulationResult, EngineError>,
    pub elapsed: Duration,
}

impl TimedRun {
    pub fn result(&self) -> &SimulationResult {
        match &self.outcome {
            Ok(r) => r,
            Err(e) => panic!("run {:?} failed: {e}", self.run),
        }
    }
}

/// Executes every cell of `spec`, fanning out across runs, and times each.
pub fn run_matrix(spec: &SweepSpec, exec: Execution) -> Vec<TimedRun> {
    let runs = spec.runs();
    exec.map(&runs, |r| {
        let start = Instant::now();
        let outcome = spec.execute(r, Execution::Sequential);
        TimedRun { run: r.clone(), outcome, elapsed: start.elapsed() }
    })
}

/// Median; even counts average the two middle values.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Covered fraction of the free grid points accepted by `select`; `None`
/// when the selection is empty.
pub fn region_coverage<F>(
    positions: &[Point2],
    r_s: f64,
    env: &EnvironmentSpec,
    resolution: f64,
    select: F,
) -> Option<f64>
where
    F: Fn(Point2) -> bool + Sync + Send,
{
    let grid = CoverageGrid::new(env, resolution).ok()?;
    let (hits, total) = grid.count_covered(positions, r_s, env, false, Execution::Sequential, select);
    (total > 0).then(|| hits as f64 / total as f64)
}

/// Coverage of the open space between crevice slabs at the run's PAC grid
/// resolution.
pub fn crevice_coverage(result: &SimulationResult) -> Option<f64> {
    let gaps = result.scenario.crevice_gaps();
    region_coverage(
        &result.final_state.active_positions(),
        result.config.r_s,
        &result.scenario,
        result.config.pac_grid_resolution,
        move |q| gaps.iter().any(|g| g.contains_strictly(q)),
    )
}

pub fn path_length(path: &[Point2]) -> f64 {
    path.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Smallest distance from any blocker to the path, sampling every `step`.
pub fn min_clearance(path: &[Point2], blockers: &[Point2], step: f64) -> f64 {
    let mut best = f64::INFINITY;
    let mut visit = |p: Point2| {
        for b in blockers {
            best = best.min(p.distance(*b));
        }
    };
    if let [only] = path {
        visit(*only);
    }
    for w in path.windows(2) {
        let n = ((w[0].distance(w[1]) / step).ceil() as usize).max(1);
        for k in 0..=n {
            visit(w[0].lerp(w[1], k as f64 / n as f64));
        }
    }
    best
}

/// Whether every sample of the path (every `step`) lies in free space.
pub fn path_is_free(path: &[Point2], env: &EnvironmentSpec, step: f64) -> bool {
    path.windows(2).all(|w| {
        let n = ((w[0].distance(w[1]) / step).ceil() as usize).max(1);
        (0..=n).all(|k| env.is_free(w[0].lerp(w[1], k as f64 / n as f64)))
    })
}

/// Active node of `class` closest to `anchor`.
pub fn pick_node(
    state: &SimulationState,
    env: &EnvironmentSpec,
    r_s: f64,
    class: NodeClass,
    anchor: Point2,
) -> Option<NodeId> {
    state
        .active()
        .filter(|n| classify_node(n.position, env, r_s) == class)
        .min_by(|a, b| a.position.distance(anchor).total_cmp(&b.position.distance(anchor)))
        .map(|n| n.id)
}
