//! Deterministic simulator for incremental, noise-tolerant sensor-network
//! deployment by centroidal Voronoi relaxation.
//!
//! Nodes are injected one at a time near an entry point. Every tick each
//! active node builds its Voronoi cell restricted to its sensing disk (using
//! noisy estimates of its neighbours' positions), then moves to the cell's
//! centroid. Injection continues while some node is isolated or the entry
//! point is uncovered.
//!
//! ```
//! use bison_core::{build_scenario, run, ScenarioKind, SimulationConfig, RunOptions};
//!
//! let env = build_scenario(ScenarioKind::Empty, 4.0, 4.0, 0).unwrap();
//! let config = SimulationConfig { max_ticks: 400, ..SimulationConfig::default() };
//! let result = run(&config, &env, &[], &RunOptions::default()).unwrap();
//! assert!(result.final_pac() > 0.8);
//! ```

pub mod engine;
pub mod environment;
pub mod exec;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod perception;
pub mod sweep;
pub mod voronoi;

/// Node identity: injection order, starting at 0.
pub type NodeId = usize;

pub use engine::{
    check_termination, finite_node_bound, inject_node, network_connected, plan_exit, run, should_inject, CellSnapshot,
    ConfigError, EngineError, FaultAction, FaultEvent, FaultReport, Node, NodeClass, NodeState, RunOptions, Simulation,
    SimulationConfig, SimulationResult, SimulationState, Termination, TrajectoryRow,
};
pub use environment::{build_scenario, EnvironmentError, EnvironmentSpec, Obstacle, ScenarioKind, WallShape};
pub use exec::Execution;
pub use geometry::{Point2, Polygon};
pub use metrics::{CoverageGrid, MetricsRecord};
pub use perception::NoiseModel;
