//! The deployment loop: injection, per-tick centroid relaxation, termination,
//! node failure and exit planning.
//!
//! A tick runs in five phases: optional injection, a snapshot of true
//! positions, serial perception (all noise draws happen here, in id order),
//! cell construction over the immutable snapshot (fanned out by
//! [`Execution`]), and finally the moves and bookkeeping. Because the only
//! parallel phase is pure, runs are bit-identical in both execution modes.

mod exit;
mod faults;

use std::collections::{BTreeSet, VecDeque};
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{EnvironmentError, EnvironmentSpec};
use crate::exec::Execution;
use crate::geometry::Point2;
use crate::metrics::{self, CoverageGrid, MetricsError, MetricsRecord};
use crate::perception::{perceive_neighbors, sense_obstacle_bodies, NoiseModel, PerceivedNeighbor};
use crate::voronoi::{restricted_cell, target_centroid, VoronoiCell};
use crate::NodeId;

pub use exit::{plan_exit_path, ExitError};
pub use faults::{classify_node, parse_fault_plan, FaultAction, FaultEvent, FaultPlanError, FaultReport, NodeClass};

/// Spawn attempts (each with a fresh angle) before injection gives up.
pub const INJECTION_RETRIES: usize = 32;

/// Default exit-path avoidance radius as a fraction of the sensing range.
pub const DEFAULT_AVOID_FRACTION: f64 = 0.3;

/// Relative PAC loss still counted as recovered after a fault.
pub const RECOVERY_TOLERANCE: f64 = 0.01;

const INJECTION_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid `{field}`: {reason}")]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: String,
}

impl ConfigError {
    fn new(field: &'static str, reason: impl Into<String>) -> Self {
        ConfigError { field, reason: reason.into() }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("injection blocked at tick {tick}: no free spawn position after {INJECTION_RETRIES} attempts")]
    InjectionBlocked { tick: u64 },
    #[error("node {0} was never injected")]
    NodeNotFound(NodeId),
    #[error("node {0} is not active")]
    NodeNotActive(NodeId),
    #[error("exit of node {id} blocked: {source}")]
    ExitBlocked {
        id: NodeId,
        #[source]
        source: ExitError,
    },
}

/// All tunables of one run. Distances in meters, times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub r_s: f64,
    pub r_c: f64,
    pub sigma: f64,
    pub tau: f64,
    pub c_max: u32,
    pub min_pac: f64,
    pub max_ticks: u64,
    pub dt: f64,
    pub injection_point: Point2,
    pub injection_offset: f64,
    pub seed: u64,
    pub pac_grid_resolution: f64,
    pub occlude_coverage: bool,
    pub r_avoid: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig::for_sensing_range(1.0)
    }
}

impl SimulationConfig {
    /// Defaults with every range-derived value scaled to `r_s`:
    /// `R_C = √3·R_S`, `τ = R_S/100`, grid `R_S/20`, avoidance `0.3·R_S`.
    pub fn for_sensing_range(r_s: f64) -> Self {
        SimulationConfig {
            r_s,
            r_c: 3f64.sqrt() * r_s,
            sigma: 0.0,
            tau: r_s / 100.0,
            c_max: 15,
            min_pac: 0.90,
            max_ticks: 2000,
            dt: 1.0,
            injection_point: Point2::ORIGIN,
            injection_offset: 0.01,
            seed: 0,
            pac_grid_resolution: r_s / 20.0,
            occlude_coverage: false,
            r_avoid: DEFAULT_AVOID_FRACTION * r_s,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let finite = |field: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::new(field, format!("{v} is not finite")))
            }
        };
        for (field, v) in [
            ("r_s", self.r_s),
            ("r_c", self.r_c),
            ("sigma", self.sigma),
            ("tau", self.tau),
            ("min_pac", self.min_pac),
            ("dt", self.dt),
            ("injection_offset", self.injection_offset),
            ("pac_grid_resolution", self.pac_grid_resolution),
            ("r_avoid", self.r_avoid),
        ] {
            finite(field, v)?;
        }
        if !self.injection_point.is_finite() {
            return Err(ConfigError::new("injection_point", "coordinates must be finite"));
        }
        if self.r_s <= 0.0 {
            return Err(ConfigError::new("r_s", format!("{} must be positive", self.r_s)));
        }
        if self.r_c < self.r_s {
            return Err(ConfigError::new("r_c", format!("{} is below r_s = {}", self.r_c, self.r_s)));
        }
        if self.sigma < 0.0 {
            return Err(ConfigError::new("sigma", format!("{} must be non-negative", self.sigma)));
        }
        if self.tau <= 0.0 {
            return Err(ConfigError::new("tau", format!("{} must be positive", self.tau)));
        }
        if !(self.min_pac > 0.0 && self.min_pac <= 1.0) {
            return Err(ConfigError::new("min_pac", format!("{} outside (0, 1]", self.min_pac)));
        }
        if self.dt <= 0.0 {
            return Err(ConfigError::new("dt", format!("{} must be positive", self.dt)));
        }
        if self.max_ticks == 0 {
            return Err(ConfigError::new("max_ticks", "must be at least 1"));
        }
        if self.injection_offset < 0.0 {
            return Err(ConfigError::new("injection_offset", "must be non-negative"));
        }
        if !(self.pac_grid_resolution > 0.0 && self.pac_grid_resolution <= self.r_s / 10.0 + 1e-12) {
            return Err(ConfigError::new(
                "pac_grid_resolution",
                format!("{} outside (0, r_s/10 = {}]", self.pac_grid_resolution, self.r_s / 10.0),
            ));
        }
        if !(self.r_avoid > 0.0 && self.r_avoid < self.r_s) {
            return Err(ConfigError::new("r_avoid", format!("{} outside (0, r_s)", self.r_avoid)));
        }
        Ok(())
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel { sigma: self.sigma, mu: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeState {
    Active,
    Failed,
    Exiting,
}

impl fmt::Display for NodeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeState::Active => "active",
            NodeState::Failed => "failed",
            NodeState::Exiting => "exiting",
        })
    }
}

impl FromStr for NodeState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "active" => Ok(NodeState::Active),
            "failed" => Ok(NodeState::Failed),
            "exiting" => Ok(NodeState::Exiting),
            other => Err(format!("unknown node state `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub position: Point2,
    pub state: NodeState,
    pub last_shift: f64,
    pub cumulative_distance: f64,
    /// Mass-normalized kinetic energy spent so far.
    pub cumulative_energy: f64,
    pub injected_at: u64,
}

impl Node {
    pub fn is_active(&self) -> bool {
        self.state == NodeState::Active
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationState {
    pub tick: u64,
    /// Every node ever injected, indexed by id.
    pub nodes: Vec<Node>,
    pub injected_count: usize,
    pub pac_history: Vec<f64>,
    pub best_pac: f64,
    pub no_improve_count: u32,
    /// Sum of the active nodes' shifts in the last tick.
    pub last_total_shift: f64,
    pub cdt: f64,
}

impl SimulationState {
    pub fn new() -> Self {
        SimulationState {
            tick: 0,
            nodes: Vec::new(),
            injected_count: 0,
            pac_history: Vec::new(),
            best_pac: 0.0,
            no_improve_count: 0,
            last_total_shift: 0.0,
            cdt: 0.0,
        }
    }

    pub fn active(&self) -> impl Iterator<Item = &Node> + '_ {
        self.nodes.iter().filter(|n| n.is_active())
    }

    pub fn active_count(&self) -> usize {
        self.active().count()
    }

    pub fn active_positions(&self) -> Vec<Point2> {
        self.active().map(|n| n.position).collect()
    }

    pub fn node(&self, id: NodeId) -> Result<&Node, EngineError> {
        self.nodes.get(id).ok_or(EngineError::NodeNotFound(id))
    }

    pub fn current_pac(&self) -> f64 {
        self.pac_history.last().copied().unwrap_or(0.0)
    }
}

impl Default for SimulationState {
    fn default() -> Self {
        SimulationState::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Continue,
    Converged,
    CoverageStall,
    TickLimit,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Continue => "continue",
            Termination::Converged => "converged",
            Termination::CoverageStall => "coverage_stall",
            Termination::TickLimit => "tick_limit",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Termination {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "continue" => Ok(Termination::Continue),
            "converged" => Ok(Termination::Converged),
            "coverage_stall" => Ok(Termination::CoverageStall),
            "tick_limit" => Ok(Termination::TickLimit),
            other => Err(format!("unknown termination `{other}`")),
        }
    }
}

/// Whether every node can reach every other through hops of length ≤ `r_c`.
/// A single node is connected; an empty network is not.
pub fn network_connected(positions: &[Point2], r_c: f64) -> bool {
    if positions.is_empty() {
        return false;
    }
    let r_sq = r_c * r_c;
    let mut seen = vec![false; positions.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut reached = 1;
    while let Some(i) = queue.pop_front() {
        for j in 0..positions.len() {
            if !seen[j] && positions[i].distance_sq(positions[j]) <= r_sq {
                seen[j] = true;
                reached += 1;
                queue.push_back(j);
            }
        }
    }
    reached == positions.len()
}

/// Injection trigger: some active node has no other active node within
/// `r_c`, or no active node lies within `r_s` of the injection point.
pub fn should_inject(state: &SimulationState, config: &SimulationConfig) -> bool {
    let positions = state.active_positions();
    let r_s_sq = config.r_s * config.r_s;
    let entry_uncovered = !positions.iter().any(|p| p.distance_sq(config.injection_point) <= r_s_sq);
    if entry_uncovered {
        return true;
    }
    let r_c_sq = config.r_c * config.r_c;
    positions
        .iter()
        .enumerate()
        .any(|(i, p)| !positions.iter().enumerate().any(|(j, q)| i != j && p.distance_sq(*q) <= r_c_sq))
}

/// Adds a node at `injection_point + offset·(cos θ, sin θ)` with
/// `θ ~ U[0, π/2]`, redrawing θ while the spawn point is not free.
pub fn inject_node<R: Rng + ?Sized>(
    state: &mut SimulationState,
    config: &SimulationConfig,
    env: &EnvironmentSpec,
    rng: &mut R,
) -> Result<Node, EngineError> {
    for _ in 0..INJECTION_RETRIES {
        let theta = rng.random::<f64>() * FRAC_PI_2;
        let position = config.injection_point + Point2::from_polar(config.injection_offset, theta);
        if env.is_free(position) {
            let node = Node {
                id: state.nodes.len(),
                position,
                state: NodeState::Active,
                last_shift: 0.0,
                cumulative_distance: 0.0,
                cumulative_energy: 0.0,
                injected_at: state.tick,
            };
            state.nodes.push(node.clone());
            state.injected_count += 1;
            return Ok(node);
        }
    }
    Err(EngineError::InjectionBlocked { tick: state.tick })
}

/// Stop rule. `converged` needs the last tick's total shift below `τ` with
/// no pending injection; `coverage_stall` needs PAC ≥ `min_PAC`, `c_max`
/// ticks without improvement and a connected network.
pub fn check_termination(state: &SimulationState, config: &SimulationConfig) -> Termination {
    if state.tick >= 1
        && state.active_count() >= 1
        && state.last_total_shift < config.tau
        && !should_inject(state, config)
    {
        return Termination::Converged;
    }
    if state.current_pac() >= config.min_pac
        && state.no_improve_count >= config.c_max
        && network_connected(&state.active_positions(), config.r_c)
    {
        return Termination::CoverageStall;
    }
    if state.tick >= config.max_ticks {
        return Termination::TickLimit;
    }
    Termination::Continue
}

/// Exit route for node `id` back to the injection point, avoiding the other
/// active nodes by `r_avoid`.
pub fn plan_exit(
    state: &SimulationState,
    config: &SimulationConfig,
    env: &EnvironmentSpec,
    id: NodeId,
    r_avoid: f64,
) -> Result<Vec<Point2>, EngineError> {
    let node = state.node(id)?;
    if !node.is_active() {
        return Err(EngineError::NodeNotActive(id));
    }
    if !(r_avoid > 0.0 && r_avoid < config.r_s) {
        return Err(ConfigError::new("r_avoid", format!("{r_avoid} outside (0, r_s)")).into());
    }
    let blockers: Vec<Point2> = state.active().filter(|n| n.id != id).map(|n| n.position).collect();
    plan_exit_path(node.position, config.injection_point, &blockers, r_avoid, env)
        .map_err(|source| EngineError::ExitBlocked { id, source })
}

/// Upper bound on injections for a finite free area:
/// `⌈free_area / (½πR_S²)⌉ + 8`.
pub fn finite_node_bound(env: &EnvironmentSpec, r_s: f64) -> usize {
    (env.free_area() / (0.5 * std::f64::consts::PI * r_s * r_s)).ceil() as usize + 8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub tick: u64,
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    pub shift: f64,
    pub state: NodeState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub id: NodeId,
    pub polygons: Vec<Vec<[f64; 2]>>,
}

/// Cells built during the step that produced `tick`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSnapshot {
    pub tick: u64,
    pub cells: Vec<CellRecord>,
}

impl CellRecord {
    fn from_cell(cell: &VoronoiCell) -> Self {
        CellRecord {
            id: cell.owner_id,
            polygons: cell.region.iter().map(|p| p.vertices().iter().map(|v| [v.x, v.y]).collect()).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub snapshot_ticks: Vec<u64>,
    pub record_trajectory: bool,
    pub exec: Execution,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { snapshot_ticks: Vec::new(), record_trajectory: true, exec: Execution::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationResult {
    pub config: SimulationConfig,
    pub scenario: EnvironmentSpec,
    pub termination: Termination,
    pub final_state: SimulationState,
    pub metrics: Vec<MetricsRecord>,
    pub trajectory: Vec<TrajectoryRow>,
    pub snapshots: Vec<CellSnapshot>,
    pub faults: Vec<FaultReport>,
}

impl SimulationResult {
    pub fn final_record(&self) -> Option<&MetricsRecord> {
        self.metrics.last()
    }

    pub fn final_pac(&self) -> f64 {
        self.final_record().map_or(0.0, |r| r.pac)
    }

    pub fn connected(&self) -> bool {
        network_connected(&self.final_state.active_positions(), self.config.r_c)
    }
}

/// A run in progress: configuration, world, state and random streams.
/// Cloning forks the run, random streams included.
#[derive(Clone)]
pub struct Simulation {
    config: SimulationConfig,
    env: EnvironmentSpec,
    grid: CoverageGrid,
    state: SimulationState,
    injection_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    exec: Execution,
    metrics: Vec<MetricsRecord>,
    trajectory: Option<Vec<TrajectoryRow>>,
    snapshot_ticks: BTreeSet<u64>,
    snapshots: Vec<CellSnapshot>,
    faults: Vec<FaultReport>,
    last_cells: Vec<VoronoiCell>,
}

impl Simulation {
    pub fn new(config: SimulationConfig, env: EnvironmentSpec, options: &RunOptions) -> Result<Self, EngineError> {
        config.validate()?;
        if !env.is_free(config.injection_point) {
            return Err(ConfigError::new("injection_point", "lies outside free space").into());
        }
        let grid = CoverageGrid::new(&env, config.pac_grid_resolution)?;
        let mut injection_rng = ChaCha8Rng::seed_from_u64(config.seed);
        injection_rng.set_stream(INJECTION_STREAM);
        let mut noise_rng = ChaCha8Rng::seed_from_u64(config.seed);
        noise_rng.set_stream(NOISE_STREAM);
        Ok(Simulation {
            config,
            env,
            grid,
            state: SimulationState::new(),
            injection_rng,
            noise_rng,
            exec: options.exec,
            metrics: Vec::new(),
            trajectory: options.record_trajectory.then(Vec::new),
            snapshot_ticks: options.snapshot_ticks.iter().copied().collect(),
            snapshots: Vec::new(),
            faults: Vec::new(),
            last_cells: Vec::new(),
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn env(&self) -> &EnvironmentSpec {
        &self.env
    }

    pub fn state(&self) -> &SimulationState {
        &self.state
    }

    pub fn metrics(&self) -> &[MetricsRecord] {
        &self.metrics
    }

    /// Cells built in the most recent step.
    pub fn last_cells(&self) -> &[VoronoiCell] {
        &self.last_cells
    }

    pub fn termination(&self) -> Termination {
        check_termination(&self.state, &self.config)
    }

    /// PAC of the current active positions.
    pub fn measure_pac(&self) -> f64 {
        metrics::pac(
            &self.state.active_positions(),
            self.config.r_s,
            &self.env,
            &self.grid,
            self.config.occlude_coverage,
            self.exec,
        )
    }

    /// Advances one tick and returns its metrics record.
    pub fn step(&mut self) -> Result<&MetricsRecord, EngineError> {
        let cfg = &self.config;
        if should_inject(&self.state, cfg) {
            inject_node(&mut self.state, cfg, &self.env, &mut self.injection_rng)?;
        }

        let snapshot: Vec<(NodeId, Point2)> = self.state.active().map(|n| (n.id, n.position)).collect();
        let noise = cfg.noise();
        let views: Vec<(NodeId, Point2, Vec<PerceivedNeighbor>)> = snapshot
            .iter()
            .map(|&(id, p)| {
                let others: Vec<(NodeId, Point2)> = snapshot.iter().copied().filter(|&(j, _)| j != id).collect();
                (id, p, perceive_neighbors(p, &others, cfg.r_c, noise, &mut self.noise_rng))
            })
            .collect();

        let env = &self.env;
        let planes = env.boundary_planes();
        let r_s = cfg.r_s;
        let built = self.exec.map(&views, |(id, p, neighbors)| {
            let bodies = sense_obstacle_bodies(*p, env, r_s)?;
            Ok::<_, EnvironmentError>(restricted_cell(*id, *p, neighbors, &planes, &bodies, r_s).ok())
        });

        let mut cells = Vec::with_capacity(built.len());
        let mut shifts = Vec::with_capacity(built.len());
        for (&(id, p), cell) in snapshot.iter().zip(built) {
            let target = match cell? {
                Some(cell) => {
                    let t = target_centroid(&cell, env);
                    cells.push(cell);
                    t
                }
                None => p,
            };
            let shift = p.distance(target);
            let node = &mut self.state.nodes[id];
            node.position = target;
            node.last_shift = shift;
            node.cumulative_distance += shift;
            node.cumulative_energy += metrics::kinetic_energy_increment(shift, cfg.dt);
            shifts.push(shift);
            debug_assert!(env.is_free(target), "node {id} left free space");
        }
        for node in self.state.nodes.iter_mut().filter(|n| !n.is_active()) {
            node.last_shift = 0.0;
        }

        let n_t = snapshot.len();
        let state = &mut self.state;
        state.last_total_shift = shifts.iter().sum();
        state.cdt = metrics::cdt_update(state.cdt, &shifts, n_t);
        state.tick += 1;

        let positions = state.active_positions();
        let pac = metrics::pac(&positions, r_s, env, &self.grid, cfg.occlude_coverage, self.exec);
        state.pac_history.push(pac);
        if pac >= cfg.min_pac && pac > state.best_pac {
            state.best_pac = pac;
            state.no_improve_count = 0;
        } else {
            state.no_improve_count += 1;
        }

        let areas: Vec<f64> = cells.iter().map(|c| c.area).collect();
        let mean_velocity = if n_t == 0 { 0.0 } else { state.last_total_shift / cfg.dt / n_t as f64 };
        let record = MetricsRecord {
            tick: state.tick,
            pac,
            adt: metrics::adt(&positions, cfg.injection_point),
            cdt: state.cdt,
            u_a: metrics::uniformity(&areas),
            mean_velocity,
            active_nodes: positions.len(),
            injected_count: state.injected_count,
            per_node_energy: state.nodes.iter().map(|n| n.cumulative_energy).collect(),
        };

        if let Some(rows) = self.trajectory.as_mut() {
            rows.extend(state.nodes.iter().map(|n| TrajectoryRow {
                tick: state.tick,
                id: n.id,
                x: n.position.x,
                y: n.position.y,
                shift: n.last_shift,
                state: n.state,
            }));
        }
        if self.snapshot_ticks.contains(&state.tick) {
            self.snapshots
                .push(CellSnapshot { tick: state.tick, cells: cells.iter().map(CellRecord::from_cell).collect() });
        }
        self.last_cells = cells;
        self.metrics.push(record);
        Ok(self.metrics.last().expect("just pushed"))
    }

    fn restart_stall_counter(&mut self) {
        self.state.best_pac = 0.0;
        self.state.no_improve_count = 0;
    }

    /// Marks node `id` failed: it stops moving, sensing and being sensed.
    pub fn fail_node(&mut self, id: NodeId) -> Result<(), EngineError> {
        if !self.state.node(id)?.is_active() {
            return Err(EngineError::NodeNotActive(id));
        }
        let node = &mut self.state.nodes[id];
        node.state = NodeState::Failed;
        node.last_shift = 0.0;
        self.restart_stall_counter();
        Ok(())
    }

    /// Plans node `id`'s exit path and removes it from the collective.
    pub fn begin_exit(&mut self, id: NodeId) -> Result<Vec<Point2>, EngineError> {
        let path = plan_exit(&self.state, &self.config, &self.env, id, self.config.r_avoid)?;
        let node = &mut self.state.nodes[id];
        node.state = NodeState::Exiting;
        node.last_shift = 0.0;
        self.restart_stall_counter();
        Ok(path)
    }

    /// Applies a fault now and opens its report; figures that depend on the
    /// aftermath are filled in by [`Simulation::finish`].
    pub fn apply_fault(&mut self, event: &FaultEvent) -> Result<(), EngineError> {
        let node = self.state.node(event.node)?;
        let class = classify_node(node.position, &self.env, self.config.r_s);
        let pac_before = self.state.current_pac();
        let cdt_at_fault = self.state.cdt;
        let exit_path = match event.action {
            FaultAction::Fail => {
                self.fail_node(event.node)?;
                None
            }
            FaultAction::Exit => Some(self.begin_exit(event.node)?),
        };
        self.faults.push(FaultReport {
            tick: self.state.tick,
            action: event.action,
            node: event.node,
            class,
            pac_before,
            pac_at_fault: self.measure_pac(),
            pac_min: f64::NAN,
            ticks_to_recover: None,
            recovery_cdt: cdt_at_fault,
            exit_path,
        });
        Ok(())
    }

    /// Steps until termination, applying `faults` at their ticks. While
    /// faults are still pending only the tick limit ends the run.
    pub fn run_to_end(&mut self, faults: &[FaultEvent]) -> Result<Termination, EngineError> {
        let mut pending: Vec<FaultEvent> = faults.to_vec();
        pending.sort_by_key(|e| e.tick);
        let mut pending = VecDeque::from(pending);
        loop {
            while pending.front().is_some_and(|e| e.tick <= self.state.tick) {
                let event = pending.pop_front().expect("checked");
                self.apply_fault(&event)?;
            }
            self.step()?;
            match self.termination() {
                Termination::Continue => {}
                Termination::TickLimit => return Ok(Termination::TickLimit),
                t if pending.is_empty() => return Ok(t),
                _ => {}
            }
        }
    }

    /// Closes the fault reports and packages the run.
    pub fn finish(mut self, termination: Termination) -> SimulationResult {
        let ends: Vec<u64> =
            self.faults.iter().skip(1).map(|f| f.tick).chain(std::iter::once(self.state.tick)).collect();
        for (report, end) in self.faults.iter_mut().zip(ends) {
            let window: Vec<&MetricsRecord> =
                self.metrics.iter().filter(|r| r.tick > report.tick && r.tick <= end).collect();
            report.pac_min = window.iter().map(|r| r.pac).fold(report.pac_at_fault, f64::min);
            let target = report.pac_before * (1.0 - RECOVERY_TOLERANCE);
            report.ticks_to_recover = if report.pac_at_fault >= target {
                Some(0)
            } else {
                window.iter().find(|r| r.pac >= target).map(|r| r.tick - report.tick)
            };
            let cdt_end = window.last().map_or(report.recovery_cdt, |r| r.cdt);
            report.recovery_cdt = cdt_end - report.recovery_cdt;
        }
        SimulationResult {
            config: self.config,
            scenario: self.env,
            termination,
            final_state: self.state,
            metrics: self.metrics,
            trajectory: self.trajectory.unwrap_or_default(),
            snapshots: self.snapshots,
            faults: self.faults,
        }
    }
}

/// Runs a full simulation, applying `fault_plan` events at their ticks.
pub fn run(
    config: &SimulationConfig,
    env: &EnvironmentSpec,
    fault_plan: &[FaultEvent],
    options: &RunOptions,
) -> Result<SimulationResult, EngineError> {
    let mut sim = Simulation::new(config.clone(), env.clone(), options)?;
    let termination = sim.run_to_end(fault_plan)?;
    Ok(sim.finish(termination))
}
