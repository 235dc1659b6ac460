//! The crate-level documentation example, run as a test.

use bison_core::{build_scenario, run, RunOptions, ScenarioKind, SimulationConfig, Termination};

#[test]
fn small_room_reaches_coverage() {
    let env = build_scenario(ScenarioKind::Empty, 4.0, 4.0, 0).unwrap();
    let config = SimulationConfig { max_ticks: 400, ..SimulationConfig::default() };
    let result = run(&config, &env, &[], &RunOptions::default()).unwrap();
    assert!(result.final_pac() > 0.8);
    assert_ne!(result.termination, Termination::TickLimit);
    assert!(result.connected());
}
