//! Exit routes: a straight line to the target, bent around any node it would
//! pass closer than `r_avoid` to.
//!
//! A detour follows the avoidance circle from where the line enters it to
//! where it leaves. The arc is drawn as a polyline whose first and last legs
//! are tangent to the circle and whose inner vertices sit on a slightly
//! larger circle, so no chord cuts inside the clearance radius.

use std::f64::consts::{PI, TAU};

use thiserror::Error;

use crate::environment::EnvironmentSpec;
use crate::geometry::Point2;

/// Largest angular step of a detour polyline, in radians.
const MAX_ARC_STEP: f64 = PI / 36.0;

/// Relative inflation of the avoidance radius so rounding never lands a
/// vertex inside it.
const RADIUS_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExitError {
    #[error("start lies within the avoidance radius of another node")]
    StartCrowded,
    #[error("target lies within the avoidance radius of another node")]
    TargetCrowded,
    #[error("route crosses an obstacle")]
    ObstacleInWay,
    #[error("no clearance-respecting detour around the node at ({x}, {y})")]
    NoDetour { x: f64, y: f64 },
}

/// Parameter interval `(t0, t1)` of `a + t(b − a)`, `t ∈ [0, 1]`, strictly
/// inside the circle; `None` if the segment only grazes or misses it.
fn circle_crossing(a: Point2, b: Point2, center: Point2, r: f64) -> Option<(f64, f64)> {
    let d = b - a;
    let f = a - center;
    let qa = d.dot(d);
    if qa == 0.0 {
        return None;
    }
    let qb = 2.0 * f.dot(d);
    let qc = f.dot(f) - r * r;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc <= 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let t0 = ((-qb - s) / (2.0 * qa)).max(0.0);
    let t1 = ((-qb + s) / (2.0 * qa)).min(1.0);
    (t1 - t0 > 1e-12).then_some((t0, t1))
}

fn segment_clear(a: Point2, b: Point2, blockers: &[Point2], r: f64, env: &EnvironmentSpec) -> bool {
    env.segment_is_free(a, b) && blockers.iter().all(|&c| circle_crossing(a, b, c, r).is_none())
}

/// Polyline from `entry` to `leave` (both on the circle of radius `r`
/// around `center`) sweeping `sweep` radians (signed).
fn arc_polyline(center: Point2, r: f64, entry: Point2, sweep: f64) -> Vec<Point2> {
    let a0 = (entry.y - center.y).atan2(entry.x - center.x);
    let steps = ((sweep.abs() / MAX_ARC_STEP).ceil() as usize).max(2);
    let delta = sweep / steps as f64;
    let outer = r / delta.abs().cos();
    (1..=steps)
        .map(|i| {
            let radius = if i == steps { r } else { outer };
            center + Point2::from_polar(radius, a0 + delta * i as f64)
        })
        .collect()
}

/// Plans a route from `start` to `target` keeping at least `r_avoid` from
/// every point in `blockers` and staying in free space.
pub fn plan_exit_path(
    start: Point2,
    target: Point2,
    blockers: &[Point2],
    r_avoid: f64,
    env: &EnvironmentSpec,
) -> Result<Vec<Point2>, ExitError> {
    if start.distance(target) <= 1e-12 {
        return Ok(vec![start]);
    }
    if blockers.iter().any(|b| b.distance(start) < r_avoid) {
        return Err(ExitError::StartCrowded);
    }
    if blockers.iter().any(|b| b.distance(target) < r_avoid) {
        return Err(ExitError::TargetCrowded);
    }
    let r = r_avoid * (1.0 + RADIUS_SLACK);
    // Tests use the exact radius; vertices are placed on the inflated one.
    let mut path = vec![start];
    let mut current = start;
    for _ in 0..=blockers.len() {
        let first_hit = blockers
            .iter()
            .filter_map(|&c| circle_crossing(current, target, c, r_avoid).map(|(t0, t1)| (t0, t1, c)))
            .min_by(|x, y| x.0.total_cmp(&y.0));
        let Some((_, _, center)) = first_hit else {
            if !env.segment_is_free(current, target) {
                return Err(ExitError::ObstacleInWay);
            }
            path.push(target);
            return Ok(path);
        };
        let (t0, t1) = circle_crossing(current, target, center, r).unwrap_or((0.0, 0.0));
        let dir = target - current;
        let entry = current + dir * t0;
        let leave = current + dir * t1;
        if !env.segment_is_free(current, entry) {
            return Err(ExitError::ObstacleInWay);
        }
        let a0 = (entry.y - center.y).atan2(entry.x - center.x);
        let a1 = (leave.y - center.y).atan2(leave.x - center.x);
        let ccw = (a1 - a0).rem_euclid(TAU);
        let sweeps = if ccw <= PI { [ccw, ccw - TAU] } else { [ccw - TAU, ccw] };
        let others: Vec<Point2> = blockers.iter().copied().filter(|&b| b != center).collect();
        let detour = sweeps.iter().find_map(|&sweep| {
            let arc = arc_polyline(center, r, entry, sweep);
            let mut prev = entry;
            for &v in &arc {
                if !segment_clear(prev, v, &others, r_avoid, env) {
                    return None;
                }
                prev = v;
            }
            Some(arc)
        });
        let Some(arc) = detour else {
            return Err(ExitError::NoDetour { x: center.x, y: center.y });
        };
        if t0 > 0.0 {
            path.push(entry);
        }
        current = *arc.last().expect("arc has at least two vertices");
        path.extend(arc);
    }
    Err(ExitError::NoDetour { x: current.x, y: current.y })
}
