//! Acceptance criteria, one verdict line each. Exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use bison_core::engine::{plan_exit_path, ExitError};
use bison_core::geometry::{clip_halfplane, polygon_area, regular_polygon, HalfPlane};
use bison_core::metrics::{drift_diffusion, uniformity};
use bison_core::perception::PerceivedNeighbor;
use bison_core::sweep::{SweepSpec, DEFAULT_SIGMAS};
use bison_core::voronoi::restricted_cell;
use bison_core::{
    build_scenario, finite_node_bound, run, Execution, NodeClass, Point2, RunOptions, ScenarioKind, Simulation,
    SimulationConfig, SimulationResult, Termination, WallShape,
};
use bison_validation::{
    crevice_coverage, median, min_clearance, path_is_free, path_length, pick_node, run_matrix, TimedRun, Verdict,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 10] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9];
const ROOM: f64 = 10.0;

fn scenarios() -> Vec<ScenarioKind> {
    let mut v = vec![ScenarioKind::Empty, ScenarioKind::Pillars(5), ScenarioKind::Pillars(10)];
    v.extend(WallShape::ALL.map(ScenarioKind::Walls));
    v.extend([ScenarioKind::Crevices(0.5), ScenarioKind::Crevices(1.0)]);
    v
}

struct Matrix {
    runs: Vec<TimedRun>,
}

impl Matrix {
    fn select(&self, scenario: ScenarioKind, sigma: f64) -> Vec<&TimedRun> {
        self.runs.iter().filter(|r| r.run.scenario == scenario && r.run.sigma == sigma).collect()
    }

    fn results(&self, scenario: ScenarioKind, sigma: f64) -> Vec<&SimulationResult> {
        self.select(scenario, sigma).into_iter().map(TimedRun::result).collect()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{x:.4}"))
}

fn ac1(m: &Matrix) -> Verdict {
    let mut fails = Vec::new();
    let mut slowest = 0.0f64;
    let mut worst = [1.0f64; 2];
    for (k, (sigma, floor)) in [(0.0, 0.98), (0.1, 0.96)].into_iter().enumerate() {
        for tr in m.select(ScenarioKind::Empty, sigma) {
            let r = tr.result();
            let pac = r.final_pac();
            worst[k] = worst[k].min(pac);
            slowest = slowest.max(tr.elapsed.as_secs_f64());
            if pac < floor || !r.connected() || tr.elapsed.as_secs_f64() > 60.0 {
                fails.push(format!("sigma={sigma} seed={} pac={pac:.4} connected={}", tr.run.seed, r.connected()));
            }
        }
    }
    Verdict {
        id: "AC1",
        title: "empty-room coverage",
        pass: fails.is_empty(),
        detail: format!(
            "min PAC sigma=0 {:.4} (>=0.98), sigma=0.1 {:.4} (>=0.96), slowest run {slowest:.2}s (<=60s){}",
            worst[0],
            worst[1],
            if fails.is_empty() { String::new() } else { format!("; failing: {}", fails.join(", ")) }
        ),
    }
}

fn ac2() -> Verdict {
    let env = build_scenario(ScenarioKind::Empty, 100.0, 100.0, 0).expect("arena");
    let options = RunOptions { record_trajectory: false, ..RunOptions::default() };
    let (mut nodes, mut pacs, mut adts) = (Vec::new(), Vec::new(), Vec::new());
    for seed in SEEDS {
        let cfg = SimulationConfig { seed, ..SimulationConfig::for_sensing_range(16.0) };
        let r = run(&cfg, &env, &[], &options).expect("large-arena run");
        nodes.push(r.final_state.active_count() as f64);
        pacs.push(r.final_pac());
        adts.push(r.final_record().and_then(|x| x.adt).unwrap_or(f64::NAN));
    }
    let (n, p, a) = (median(&nodes).unwrap(), median(&pacs).unwrap(), median(&adts).unwrap());
    Verdict {
        id: "AC2",
        title: "100 m arena, R_S=16",
        pass: (12.0..=22.0).contains(&n) && p >= 0.97 && (60.0..=100.0).contains(&a),
        detail: format!("median nodes {n} in [12,22], PAC {p:.4} >= 0.97, ADT {a:.2} m in [60,100]"),
    }
}

fn ticks_to_85(r: &SimulationResult) -> f64 {
    // Never reaching 85% counts as slower than any run that did.
    bison_core::metrics::ticks_to_fraction(&r.metrics, 0.85).map_or(f64::INFINITY, |t| t as f64)
}

fn ac3(m: &Matrix) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in [ScenarioKind::Empty, ScenarioKind::Pillars(10), ScenarioKind::Walls(WallShape::H)] {
        let quiet: Vec<f64> = m.results(kind, 0.0).into_iter().map(ticks_to_85).collect();
        let noisy: Vec<f64> = m.results(kind, 0.1).into_iter().map(ticks_to_85).collect();
        let (q, n) = (median(&quiet).unwrap(), median(&noisy).unwrap());
        pass &= n < q;
        parts.push(format!("{kind} {q} -> {n}"));
    }
    Verdict {
        id: "AC3",
        title: "noise speeds up deployment",
        pass,
        detail: format!("median ticks to 85% PAC, sigma 0 -> 0.1 must strictly drop: {}", parts.join(", ")),
    }
}

fn final_cdt(r: &SimulationResult) -> f64 {
    r.final_record().map_or(0.0, |x| x.cdt)
}

fn ac4(m: &Matrix) -> Verdict {
    let quiet: Vec<f64> = m.results(ScenarioKind::Empty, 0.0).into_iter().map(final_cdt).collect();
    let noisy: Vec<f64> = m.results(ScenarioKind::Empty, 0.1).into_iter().map(final_cdt).collect();
    let (q, n) = (median(&quiet).unwrap(), median(&noisy).unwrap());
    let gain = n / q - 1.0;
    Verdict {
        id: "AC4",
        title: "noise costs distance",
        pass: gain >= 0.25,
        detail: format!("median final CDT sigma=0 {q:.3} m, sigma=0.1 {n:.3} m, increase {:.1}% (>=25%)", gain * 100.0),
    }
}

fn ac5(m: &Matrix) -> Verdict {
    let runs = m.results(ScenarioKind::Empty, 0.0);
    let ratios: Vec<f64> =
        runs.iter().filter_map(|r| r.final_record().and_then(|x| x.adt.map(|a| x.cdt / a))).collect();
    let terminated = runs.iter().filter(|r| r.termination != Termination::TickLimit).count();
    let med = median(&ratios).unwrap_or(f64::NAN);
    Verdict {
        id: "AC5",
        title: "CDT about twice ADT",
        pass: terminated == runs.len() && (1.5..=2.5).contains(&med),
        detail: format!(
            "median CDT/ADT {med:.3} in [1.5,2.5] over {} terminated runs (range {:.3}..{:.3})",
            terminated,
            ratios.iter().copied().fold(f64::INFINITY, f64::min),
            ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        ),
    }
}

fn ac6(m: &Matrix) -> Verdict {
    let kind = ScenarioKind::Crevices(0.5);
    let quiet = m.results(kind, 0.0);
    let noisy = m.results(kind, 0.1);
    let quiet_cov: Vec<f64> = quiet.iter().map(|r| crevice_coverage(r).unwrap_or(f64::NAN)).collect();
    let noisy_cov: Vec<f64> = noisy.iter().map(|r| crevice_coverage(r).unwrap_or(f64::NAN)).collect();
    let entered = quiet_cov.iter().filter(|c| **c > 0.0).count();
    let noisy_med = median(&noisy_cov).unwrap();
    let gap = median(&noisy.iter().map(|r| r.final_pac()).collect::<Vec<_>>()).unwrap()
        - median(&quiet.iter().map(|r| r.final_pac()).collect::<Vec<_>>()).unwrap();
    Verdict {
        id: "AC6",
        title: "crevices stay empty without noise",
        pass: entered == 0 && noisy_med >= 0.5 && gap >= 0.10,
        detail: format!(
            "sigma=0 runs with any crevice point covered {entered}/{} (need 0, max coverage {:.3}), \
             sigma=0.1 median crevice coverage {noisy_med:.3} (>=0.5), median PAC gap {gap:.4} (>=0.10)",
            quiet.len(),
            quiet_cov.iter().copied().fold(0.0, f64::max)
        ),
    }
}

fn ac7() -> Verdict {
    let env = build_scenario(ScenarioKind::Empty, ROOM, ROOM, 0).expect("room");
    let options = RunOptions { record_trajectory: false, ..RunOptions::default() };
    let anchors = [
        (NodeClass::Interior, Point2::new(ROOM / 2.0, ROOM / 2.0)),
        (NodeClass::Side, Point2::new(ROOM / 2.0, ROOM)),
        (NodeClass::Corner, Point2::new(ROOM, ROOM)),
    ];
    let mut worst = [0u64; 3];
    let mut cdt = [Vec::new(), Vec::new(), Vec::new()];
    let mut fails = Vec::new();
    for seed in SEEDS {
        let cfg = SimulationConfig { seed, ..SimulationConfig::default() };
        let mut base = Simulation::new(cfg.clone(), env.clone(), &options).expect("simulation");
        base.run_to_end(&[]).expect("baseline");
        for (k, &(class, anchor)) in anchors.iter().enumerate() {
            let Some(id) = pick_node(base.state(), &env, cfg.r_s, class, anchor) else {
                fails.push(format!("seed {seed}: no {class} node"));
                continue;
            };
            let mut sim = base.clone();
            let before = sim.state().current_pac();
            let cdt0 = sim.state().cdt;
            sim.fail_node(id).expect("fail");
            let target = before * (1.0 - 0.01);
            let mut recovered = (sim.measure_pac() >= target).then_some(0u64);
            for t in 1..=50u64 {
                if recovered.is_some() {
                    break;
                }
                if sim.step().expect("step").pac >= target {
                    recovered = Some(t);
                }
            }
            cdt[k].push(sim.state().cdt - cdt0);
            match recovered {
                Some(t) => worst[k] = worst[k].max(t),
                None => fails.push(format!("seed {seed} {class} node {id}")),
            }
        }
    }
    let cdt_med: Vec<String> = cdt.iter().map(|v| fmt_opt(median(v))).collect();
    Verdict {
        id: "AC7",
        title: "recovery after node loss",
        pass: fails.is_empty(),
        detail: format!(
            "slowest recovery to 99% of pre-failure PAC: interior {} / side {} / corner {} ticks (<=50); \
             median recovery CDT {}{}",
            worst[0],
            worst[1],
            worst[2],
            cdt_med.join(" / "),
            if fails.is_empty() { String::new() } else { format!("; not recovered: {}", fails.join(", ")) }
        ),
    }
}

fn ac8(m: &Matrix) -> Verdict {
    let mut planned = 0usize;
    let mut refused = 0usize;
    let mut violations = Vec::new();
    let mut worst_clear = f64::INFINITY;
    let mut worst_straight = 0.0f64;
    for tr in m.select(ScenarioKind::Empty, 0.0).into_iter().chain(m.select(ScenarioKind::Pillars(10), 0.0)) {
        let r = tr.result();
        let cfg = &r.config;
        let active: Vec<_> = r.final_state.active().map(|n| (n.id, n.position)).collect();
        for &(id, start) in &active {
            let blockers: Vec<Point2> = active.iter().filter(|(j, _)| *j != id).map(|(_, p)| *p).collect();
            match plan_exit_path(start, cfg.injection_point, &blockers, cfg.r_avoid, &r.scenario) {
                Ok(path) => {
                    planned += 1;
                    let clear = min_clearance(&path, &blockers, 0.01);
                    worst_clear = worst_clear.min(clear / cfg.r_avoid);
                    let ends = *path.last().unwrap() == cfg.injection_point && path[0] == start;
                    if clear < cfg.r_avoid || !ends || !path_is_free(&path, &r.scenario, 0.01) {
                        violations.push(format!("{} seed {} node {id}", tr.run.scenario, tr.run.seed));
                    }
                }
                Err(ExitError::StartCrowded | ExitError::TargetCrowded | ExitError::NoDetour { .. }) => refused += 1,
                Err(ExitError::ObstacleInWay) => refused += 1,
            }
            if r.scenario.scenario == ScenarioKind::Empty {
                let free =
                    plan_exit_path(start, cfg.injection_point, &[], cfg.r_avoid, &r.scenario).expect("free path");
                worst_straight = worst_straight.max((path_length(&free) - start.distance(cfg.injection_point)).abs());
            }
        }
    }
    Verdict {
        id: "AC8",
        title: "exit paths keep clearance",
        pass: violations.is_empty() && planned > 0 && worst_straight <= 1e-6,
        detail: format!(
            "{planned} paths planned ({refused} refused), min clearance / r_avoid {worst_clear:.6} (>=1), \
             blocker-free length error {worst_straight:.2e} (<=1e-6){}",
            if violations.is_empty() { String::new() } else { format!("; violations: {}", violations.join(", ")) }
        ),
    }
}

fn clip_conservation() -> (bool, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..2000 {
        let center = Point2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let poly = regular_polygon(center, rng.random_range(0.1..4.0), rng.random_range(3..80)).unwrap();
        let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let anchor = center + Point2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let h = HalfPlane::new(anchor, Point2::from_polar(1.0, angle)).unwrap();
        let inside = clip_halfplane(&poly, &h).map_or(0.0, |p| polygon_area(&p));
        let outside = clip_halfplane(&poly, &h.flipped()).map_or(0.0, |p| polygon_area(&p));
        let total = polygon_area(&poly);
        worst = worst.max(((inside + outside) - total).abs() / total);
    }
    (worst <= 1e-9, worst)
}

/// Per-cell agreement with the nearest-node oracle over every grid point of
/// the room (worst cell), plus the stricter agreement over points some
/// sensing disk reaches, where a point counts only if all five memberships
/// are right.
fn cell_oracle() -> (bool, f64, f64) {
    let env = build_scenario(ScenarioKind::Empty, ROOM, ROOM, 0).unwrap();
    let planes = env.boundary_planes();
    let cfg = SimulationConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut worst_cell, mut worst_reached) = (1.0f64, 1.0f64);
    for _ in 0..20 {
        let nodes: Vec<Point2> =
            (0..5).map(|_| Point2::new(rng.random_range(1.0..9.0), rng.random_range(1.0..9.0))).collect();
        let cells: Vec<_> = nodes
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let nbrs: Vec<PerceivedNeighbor> = nodes
                    .iter()
                    .enumerate()
                    .filter(|&(j, q)| j != i && q.distance(p) <= cfg.r_c)
                    .map(|(j, &q)| PerceivedNeighbor { node_id: j, perceived_position: q })
                    .collect();
                restricted_cell(i, p, &nbrs, &planes, &[], cfg.r_s).unwrap()
            })
            .collect();
        let res = 0.02;
        let n = (ROOM / res) as usize;
        let mut per_cell = vec![0usize; nodes.len()];
        let (mut reached, mut reached_ok) = (0usize, 0usize);
        for j in 0..n {
            for i in 0..n {
                let q = Point2::new((i as f64 + 0.5) * res, (j as f64 + 0.5) * res);
                let nearest = (0..nodes.len()).min_by(|&a, &b| nodes[a].distance(q).total_cmp(&nodes[b].distance(q)));
                let mut all = true;
                for (k, c) in cells.iter().enumerate() {
                    let truth = Some(k) == nearest && nodes[k].distance(q) <= cfg.r_s;
                    let ok = truth == c.contains(q);
                    per_cell[k] += usize::from(ok);
                    all &= ok;
                }
                if nodes.iter().any(|p| p.distance(q) <= cfg.r_s) {
                    reached += 1;
                    reached_ok += usize::from(all);
                }
            }
        }
        for hits in per_cell {
            worst_cell = worst_cell.min(hits as f64 / (n * n) as f64);
        }
        worst_reached = worst_reached.min(reached_ok as f64 / reached as f64);
    }
    (worst_cell >= 0.99, worst_cell, worst_reached)
}

fn scale_invariance() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    (0..500).all(|_| {
        let areas: Vec<f64> = (0..rng.random_range(1..30)).map(|_| rng.random_range(0.01..5.0)).collect();
        let c = rng.random_range(0.001..1000.0);
        let scaled: Vec<f64> = areas.iter().map(|a| a * c).collect();
        (uniformity(&areas).unwrap() - uniformity(&scaled).unwrap()).abs() <= 1e-12
    })
}

fn drift_diffusion_exact() -> bool {
    let ramp: Vec<f64> = (0..50).map(|t| t as f64).collect();
    let bins = drift_diffusion(&ramp, 1.0, 7).unwrap();
    let ramp_ok = bins.iter().filter(|b| b.samples > 0).all(|b| b.drift == Some(1.0) && b.diffusion == Some(0.5));
    let flat = drift_diffusion(&[0.3; 20], 1.0, 4).unwrap();
    let flat_ok = flat.iter().filter(|b| b.samples > 0).all(|b| b.drift == Some(0.0) && b.diffusion == Some(0.0));
    ramp_ok && flat_ok
}

fn determinism() -> bool {
    let env = build_scenario(ScenarioKind::Pillars(5), ROOM, ROOM, 3).unwrap();
    let cfg = SimulationConfig { seed: 3, sigma: 0.05, ..SimulationConfig::default() };
    let seq = RunOptions { exec: Execution::Sequential, ..RunOptions::default() };
    let par = RunOptions { exec: Execution::Parallel, ..RunOptions::default() };
    let a = run(&cfg, &env, &[], &seq).unwrap();
    let b = run(&cfg, &env, &[], &seq).unwrap();
    let c = run(&cfg, &env, &[], &par).unwrap();
    a.metrics == b.metrics && a.trajectory == b.trajectory && a.metrics == c.metrics && a.trajectory == c.trajectory
}

fn ac9(m: &Matrix) -> Verdict {
    let (clip_ok, clip_err) = clip_conservation();
    let (oracle_ok, oracle_worst, oracle_reached) = cell_oracle();
    let scale_ok = scale_invariance();
    let dd_ok = drift_diffusion_exact();
    let det_ok = determinism();
    let mut over = 0usize;
    let mut worst_ratio = 0.0f64;
    let mut errors = 0usize;
    let (mut noiseless, mut noiseless_over) = (0usize, 0usize);
    for tr in &m.runs {
        let Ok(r) = &tr.outcome else {
            errors += 1;
            continue;
        };
        let bound = finite_node_bound(&r.scenario, r.config.r_s);
        let peak = r.metrics.iter().map(|x| x.injected_count).max().unwrap_or(0);
        worst_ratio = worst_ratio.max(peak as f64 / bound as f64);
        over += usize::from(peak > bound);
        if tr.run.sigma == 0.0 {
            noiseless += 1;
            noiseless_over += usize::from(peak > bound);
        }
    }
    let bound_ok = over == 0 && errors == 0;
    let mark = |ok: bool| if ok { "ok" } else { "FAILED" };
    Verdict {
        id: "AC9",
        title: "property suites",
        pass: clip_ok && oracle_ok && scale_ok && dd_ok && det_ok && bound_ok,
        detail: format!(
            "clip conservation {} (worst rel err {clip_err:.1e}); cell oracle {} (worst per-cell agreement {:.4}, within sensing reach {:.4}); \
             U_A scale invariance {}; drift/diffusion exactness {}; bit-determinism {}; node bound {} \
             ({over}/{} runs over, {noiseless_over}/{noiseless} at sigma=0, worst peak/bound {worst_ratio:.3}, {errors} errored)",
            mark(clip_ok),
            mark(oracle_ok),
            oracle_worst,
            oracle_reached,
            mark(scale_ok),
            mark(dd_ok),
            mark(det_ok),
            mark(bound_ok),
            m.runs.len(),
        ),
    }
}

fn pooled_spread(runs: &[&SimulationResult]) -> f64 {
    let estimates: Vec<f64> = runs
        .iter()
        .flat_map(|r| {
            let v: Vec<f64> = r.metrics.iter().map(|x| x.mean_velocity).collect();
            drift_diffusion(&v, r.config.dt, 20)
                .map(|b| b.into_iter().filter_map(|x| x.diffusion).collect())
                .unwrap_or_else(|_| Vec::new())
        })
        .collect();
    let lo = estimates.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = estimates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

fn ac10(m: &Matrix) -> Verdict {
    let quiet = pooled_spread(&m.results(ScenarioKind::Empty, 0.0));
    let noisy = pooled_spread(&m.results(ScenarioKind::Empty, 0.05));
    Verdict {
        id: "AC10",
        title: "noise widens diffusion estimates",
        pass: noisy > quiet,
        detail: format!("pooled D spread sigma=0.05 {noisy:.5} > sigma=0 {quiet:.5}"),
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let spec =
        SweepSpec::new(DEFAULT_SIGMAS.to_vec(), scenarios(), SEEDS.to_vec(), SimulationConfig::default(), ROOM, ROOM)
            .expect("sweep matrix");
    let matrix = Matrix { runs: run_matrix(&spec, Execution::Parallel) };
    println!("sweep matrix: {} runs in {:.1}s", matrix.runs.len(), start.elapsed().as_secs_f64());

    let checks: Vec<Box<dyn Fn() -> Verdict>> = vec![
        Box::new(|| ac1(&matrix)),
        Box::new(ac2),
        Box::new(|| ac3(&matrix)),
        Box::new(|| ac4(&matrix)),
        Box::new(|| ac5(&matrix)),
        Box::new(|| ac6(&matrix)),
        Box::new(ac7),
        Box::new(|| ac8(&matrix)),
        Box::new(|| ac9(&matrix)),
        Box::new(|| ac10(&matrix)),
    ];
    let mut failed = 0;
    for check in &checks {
        let verdict = check();
        failed += usize::from(!verdict.pass);
        println!("{verdict}");
    }
    println!(
        "acceptance: {} of {} criteria pass ({:.1}s)",
        checks.len() - failed,
        checks.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
