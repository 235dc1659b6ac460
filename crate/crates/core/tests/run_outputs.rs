use std::fs;

use bison_core::io::{read_metrics_csv, read_trajectory_csv, write_run_outputs, FinalState, MetricsRow};
use bison_core::{
    build_scenario, run, FaultAction, FaultEvent, RunOptions, ScenarioKind, SimulationConfig, SimulationResult,
};

fn faulted_run() -> SimulationResult {
    let env = build_scenario(ScenarioKind::Empty, 5.0, 5.0, 4).unwrap();
    let cfg = SimulationConfig { seed: 4, sigma: 0.05, max_ticks: 300, ..SimulationConfig::default() };
    let plan = [
        FaultEvent { tick: 60, action: FaultAction::Fail, node: 3 },
        FaultEvent { tick: 150, action: FaultAction::Exit, node: 5 },
    ];
    let options = RunOptions { snapshot_ticks: vec![10, 50], ..RunOptions::default() };
    run(&cfg, &env, &plan, &options).unwrap()
}

#[test]
fn every_artifact_is_written_and_reparses() {
    let result = faulted_run();
    let dir = tempfile::tempdir().unwrap();
    let written = write_run_outputs(dir.path(), &result).unwrap();
    let names: Vec<String> = written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    for expected in [
        "metrics.csv",
        "trajectory.csv",
        "final_state.json",
        "cells_10.json",
        "cells_50.json",
        "exit_path_5.json",
        "recovery.json",
    ] {
        assert!(names.iter().any(|n| n == expected), "missing {expected} in {names:?}");
    }

    let metrics = read_metrics_csv(fs::File::open(dir.path().join("metrics.csv")).unwrap()).unwrap();
    let expected: Vec<MetricsRow> = result.metrics.iter().map(|r| MetricsRow::from(r).quantized()).collect();
    assert_eq!(metrics, expected);

    let trajectory = read_trajectory_csv(fs::File::open(dir.path().join("trajectory.csv")).unwrap()).unwrap();
    assert_eq!(trajectory.len(), result.trajectory.len());
    assert_eq!(trajectory.last().unwrap().id, result.trajectory.last().unwrap().id);

    let state: FinalState =
        serde_json::from_str(&fs::read_to_string(dir.path().join("final_state.json")).unwrap()).unwrap();
    assert_eq!(state, FinalState::from_result(&result));

    let path: Vec<[f64; 2]> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("exit_path_5.json")).unwrap()).unwrap();
    assert_eq!(path.last().copied(), Some([0.0, 0.0]));

    let cells: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("cells_10.json")).unwrap()).unwrap();
    assert!(cells.as_array().is_some_and(|a| !a.is_empty()));
}

#[test]
fn identical_runs_write_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_run_outputs(a.path(), &faulted_run()).unwrap();
    write_run_outputs(b.path(), &faulted_run()).unwrap();
    for name in ["metrics.csv", "trajectory.csv", "final_state.json", "recovery.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}
