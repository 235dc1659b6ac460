//! Bounded rectangular arenas with axis-aligned rectangular obstacles, and
//! the scenario catalog: empty rooms, scattered pillars, wall layouts and
//! banks of parallel slabs forming narrow crevices.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{HalfPlane, Point2};

/// Wall thickness used by every wall blueprint, in meters.
pub const WALL_THICKNESS: f64 = 0.4;

/// Side length of a pillar, in meters.
pub const PILLAR_SIZE: f64 = 1.0;

/// Minimum spacing between pillars and from pillars to the room walls.
pub const PILLAR_CLEARANCE: f64 = 1.0;

const MAX_PLACEMENT_ATTEMPTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvironmentError {
    #[error("invalid scenario parameter: {0}")]
    InvalidParameter(String),
    #[error("scenario infeasible: {0}")]
    Infeasible(String),
    #[error("position ({x}, {y}) is not in free space")]
    IllegalPosition { x: f64, y: f64 },
}

/// Axis-aligned rectangular obstacle. Closed: its boundary is blocked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub min_corner: Point2,
    pub max_corner: Point2,
}

impl Obstacle {
    pub fn new(min_corner: Point2, max_corner: Point2) -> Result<Self, EnvironmentError> {
        if !(min_corner.is_finite() && max_corner.is_finite())
            || min_corner.x >= max_corner.x
            || min_corner.y >= max_corner.y
        {
            return Err(EnvironmentError::InvalidParameter(format!(
                "obstacle corners {min_corner:?} / {max_corner:?} do not span a rectangle"
            )));
        }
        Ok(Obstacle { min_corner, max_corner })
    }

    fn from_extent(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, EnvironmentError> {
        Obstacle::new(Point2::new(x0, y0), Point2::new(x1, y1))
    }

    pub fn width(&self) -> f64 {
        self.max_corner.x - self.min_corner.x
    }

    pub fn height(&self) -> f64 {
        self.max_corner.y - self.min_corner.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point2 {
        self.min_corner.midpoint(self.max_corner)
    }

    /// Closed containment (boundary included).
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min_corner.x && p.x <= self.max_corner.x && p.y >= self.min_corner.y && p.y <= self.max_corner.y
    }

    pub fn contains_strictly(&self, p: Point2) -> bool {
        p.x > self.min_corner.x && p.x < self.max_corner.x && p.y > self.min_corner.y && p.y < self.max_corner.y
    }

    pub fn closest_point(&self, p: Point2) -> Point2 {
        Point2::new(p.x.clamp(self.min_corner.x, self.max_corner.x), p.y.clamp(self.min_corner.y, self.max_corner.y))
    }

    pub fn distance_to(&self, p: Point2) -> f64 {
        self.closest_point(p).distance(p)
    }

    /// Euclidean gap between two rectangles (0 when they touch or overlap).
    pub fn gap_to(&self, other: &Obstacle) -> f64 {
        let dx = (other.min_corner.x - self.max_corner.x).max(self.min_corner.x - other.max_corner.x).max(0.0);
        let dy = (other.min_corner.y - self.max_corner.y).max(self.min_corner.y - other.max_corner.y).max(0.0);
        dx.hypot(dy)
    }

    /// Interiors overlap (touching edges does not count).
    pub fn overlaps(&self, other: &Obstacle) -> bool {
        self.min_corner.x < other.max_corner.x
            && other.min_corner.x < self.max_corner.x
            && self.min_corner.y < other.max_corner.y
            && other.min_corner.y < self.max_corner.y
    }

    /// Entry parameter `t ∈ [0, 1]` of the segment `a → b` into the closed
    /// rectangle (Liang–Barsky), or `None` if the segment misses it.
    pub fn segment_entry(&self, a: Point2, b: Point2) -> Option<f64> {
        let d = b - a;
        let mut t0 = 0.0_f64;
        let mut t1 = 1.0_f64;
        for (p, q) in [
            (-d.x, a.x - self.min_corner.x),
            (d.x, self.max_corner.x - a.x),
            (-d.y, a.y - self.min_corner.y),
            (d.y, self.max_corner.y - a.y),
        ] {
            if p == 0.0 {
                if q < 0.0 {
                    return None;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
                if t0 > t1 {
                    return None;
                }
            }
        }
        Some(t0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WallShape {
    H,
    Pi,
    C,
    ThreeRooms,
}

impl WallShape {
    pub const ALL: [WallShape; 4] = [WallShape::H, WallShape::Pi, WallShape::C, WallShape::ThreeRooms];
}

impl fmt::Display for WallShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WallShape::H => "H",
            WallShape::Pi => "Pi",
            WallShape::C => "C",
            WallShape::ThreeRooms => "ThreeRooms",
        })
    }
}

impl FromStr for WallShape {
    type Err = EnvironmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "h" => Ok(WallShape::H),
            "pi" => Ok(WallShape::Pi),
            "c" => Ok(WallShape::C),
            "threerooms" | "three_rooms" | "3rooms" => Ok(WallShape::ThreeRooms),
            _ => Err(EnvironmentError::InvalidParameter(format!("unknown wall shape `{s}`"))),
        }
    }
}

/// Scenario families. String form: `empty`, `pillars:<n>`, `walls:<shape>`,
/// `crevices:<gap>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ScenarioKind {
    Empty,
    Pillars(usize),
    Walls(WallShape),
    Crevices(f64),
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioKind::Empty => f.write_str("empty"),
            ScenarioKind::Pillars(n) => write!(f, "pillars:{n}"),
            ScenarioKind::Walls(shape) => write!(f, "walls:{shape}"),
            ScenarioKind::Crevices(gap) => write!(f, "crevices:{gap}"),
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = EnvironmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (s, None),
        };
        let bad = |what: &str| EnvironmentError::InvalidParameter(format!("{what} in scenario `{s}`"));
        match (head.to_ascii_lowercase().as_str(), arg) {
            ("empty", None) => Ok(ScenarioKind::Empty),
            ("pillars", Some(a)) => a.parse().map(ScenarioKind::Pillars).map_err(|_| bad("bad pillar count")),
            ("walls", Some(a)) => a.parse().map(ScenarioKind::Walls),
            ("crevices", Some(a)) => a.parse().map(ScenarioKind::Crevices).map_err(|_| bad("bad crevice gap")),
            _ => Err(bad("unrecognized kind")),
        }
    }
}

impl TryFrom<String> for ScenarioKind {
    type Error = EnvironmentError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ScenarioKind> for String {
    fn from(k: ScenarioKind) -> String {
        k.to_string()
    }
}

/// The region of interest: `[0, width] × [0, height]` minus obstacles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub width: f64,
    pub height: f64,
    pub obstacles: Vec<Obstacle>,
    pub scenario: ScenarioKind,
}

impl EnvironmentSpec {
    /// Validates dimensions, containment and pairwise non-overlap.
    pub fn new(
        width: f64,
        height: f64,
        obstacles: Vec<Obstacle>,
        scenario: ScenarioKind,
    ) -> Result<Self, EnvironmentError> {
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(EnvironmentError::InvalidParameter(format!(
                "environment dimensions {width} x {height} must be positive"
            )));
        }
        for (i, o) in obstacles.iter().enumerate() {
            if o.min_corner.x < 0.0 || o.min_corner.y < 0.0 || o.max_corner.x > width || o.max_corner.y > height {
                return Err(EnvironmentError::InvalidParameter(format!("obstacle {i} leaves the bounds")));
            }
            if obstacles[..i].iter().any(|p| p.overlaps(o)) {
                return Err(EnvironmentError::InvalidParameter(format!("obstacle {i} overlaps another")));
            }
        }
        let env = EnvironmentSpec { width, height, obstacles, scenario };
        if env.free_area() <= 0.0 {
            return Err(EnvironmentError::Infeasible("no free area left".into()));
        }
        Ok(env)
    }

    pub fn scenario_tag(&self) -> String {
        self.scenario.to_string()
    }

    pub fn free_area(&self) -> f64 {
        free_area(self)
    }

    pub fn contains_in_bounds(&self, p: Point2) -> bool {
        p.x >= 0.0 && p.x <= self.width && p.y >= 0.0 && p.y <= self.height
    }

    pub fn is_free(&self, p: Point2) -> bool {
        point_in_free_space(self, p)
    }

    /// Inward-facing half-planes of the four room walls.
    pub fn boundary_planes(&self) -> [HalfPlane; 4] {
        [
            HalfPlane { anchor: Point2::new(0.0, 0.0), inward_normal: Point2::new(1.0, 0.0) },
            HalfPlane { anchor: Point2::new(self.width, 0.0), inward_normal: Point2::new(-1.0, 0.0) },
            HalfPlane { anchor: Point2::new(0.0, 0.0), inward_normal: Point2::new(0.0, 1.0) },
            HalfPlane { anchor: Point2::new(0.0, self.height), inward_normal: Point2::new(0.0, -1.0) },
        ]
    }

    /// Obstacles whose closed rectangle comes within `radius` of `center`.
    pub fn obstacles_within(&self, center: Point2, radius: f64) -> impl Iterator<Item = &Obstacle> + '_ {
        self.obstacles.iter().filter(move |o| o.distance_to(center) < radius)
    }

    /// Whether the closed segment `a → b` stays in bounds and misses every
    /// obstacle.
    pub fn segment_is_free(&self, a: Point2, b: Point2) -> bool {
        self.contains_in_bounds(a)
            && self.contains_in_bounds(b)
            && self.obstacles.iter().all(|o| o.segment_entry(a, b).is_none())
    }

    /// Nearest point of free space that keeps `clearance` from every
    /// obstacle and room wall. Returns `p` unchanged when it already does.
    pub fn nearest_free_point(&self, p: Point2, clearance: f64) -> Point2 {
        let inset = |q: Point2| {
            Point2::new(q.x.clamp(clearance, self.width - clearance), q.y.clamp(clearance, self.height - clearance))
        };
        let clear = |q: Point2| {
            q.x >= clearance - 1e-12
                && q.x <= self.width - clearance + 1e-12
                && q.y >= clearance - 1e-12
                && q.y <= self.height - clearance + 1e-12
                && self.obstacles.iter().all(|o| o.distance_to(q) >= clearance - 1e-12)
        };
        if clear(p) {
            return p;
        }
        let mut candidates = vec![inset(p)];
        for o in &self.obstacles {
            let (x0, y0) = (o.min_corner.x - clearance, o.min_corner.y - clearance);
            let (x1, y1) = (o.max_corner.x + clearance, o.max_corner.y + clearance);
            let q = inset(p);
            candidates.extend([
                Point2::new(x0, q.y),
                Point2::new(x1, q.y),
                Point2::new(q.x, y0),
                Point2::new(q.x, y1),
                Point2::new(x0, y0),
                Point2::new(x1, y0),
                Point2::new(x0, y1),
                Point2::new(x1, y1),
            ]);
        }
        // Faces of neighbouring obstacles meet at these crossings.
        let xs: Vec<f64> = candidates.iter().map(|c| c.x).collect();
        let ys: Vec<f64> = candidates.iter().map(|c| c.y).collect();
        let mut best: Option<(f64, Point2)> = None;
        let consider = |best: &mut Option<(f64, Point2)>, c: Point2| {
            let c = inset(c);
            if clear(c) {
                let d = c.distance_sq(p);
                if best.is_none_or(|(bd, _)| d < bd) {
                    *best = Some((d, c));
                }
            }
        };
        for &c in &candidates {
            consider(&mut best, c);
        }
        if best.is_none() {
            for &x in &xs {
                for &y in &ys {
                    consider(&mut best, Point2::new(x, y));
                }
            }
        }
        best.map_or(p, |(_, c)| c)
    }

    /// Open rectangles between consecutive slabs of a crevice bank; empty for
    /// other scenario kinds.
    pub fn crevice_gaps(&self) -> Vec<Obstacle> {
        let ScenarioKind::Crevices(_) = self.scenario else {
            return Vec::new();
        };
        let mut slabs = self.obstacles.clone();
        slabs.sort_by(|a, b| a.min_corner.y.total_cmp(&b.min_corner.y));
        slabs
            .windows(2)
            .filter_map(|w| {
                Obstacle::from_extent(w[0].min_corner.x, w[0].max_corner.y, w[0].max_corner.x, w[1].min_corner.y).ok()
            })
            .collect()
    }
}

/// Bounds area minus the obstacle areas.
pub fn free_area(env: &EnvironmentSpec) -> f64 {
    env.width * env.height - env.obstacles.iter().map(Obstacle::area).sum::<f64>()
}

/// Inside the (closed) bounds and outside every closed obstacle.
pub fn point_in_free_space(env: &EnvironmentSpec, p: Point2) -> bool {
    p.is_finite() && env.contains_in_bounds(p) && !env.obstacles.iter().any(|o| o.contains(p))
}

/// Face half-planes of every obstacle within `radius` of `center` that face
/// the node: the face's outward side contains `center`, and the normal
/// points away from the obstacle.
pub fn obstacle_edges_within(
    env: &EnvironmentSpec,
    center: Point2,
    radius: f64,
) -> Result<Vec<HalfPlane>, EnvironmentError> {
    if !point_in_free_space(env, center) {
        return Err(EnvironmentError::IllegalPosition { x: center.x, y: center.y });
    }
    let mut planes = Vec::new();
    for o in env.obstacles_within(center, radius) {
        let (lo, hi) = (o.min_corner, o.max_corner);
        if center.x < lo.x {
            planes.push(HalfPlane { anchor: lo, inward_normal: Point2::new(-1.0, 0.0) });
        }
        if center.x > hi.x {
            planes.push(HalfPlane { anchor: hi, inward_normal: Point2::new(1.0, 0.0) });
        }
        if center.y < lo.y {
            planes.push(HalfPlane { anchor: lo, inward_normal: Point2::new(0.0, -1.0) });
        }
        if center.y > hi.y {
            planes.push(HalfPlane { anchor: hi, inward_normal: Point2::new(0.0, 1.0) });
        }
    }
    Ok(planes)
}

/// Builds a scenario deterministically from `(kind, width, height, seed)`.
/// Only pillar placement consumes randomness.
pub fn build_scenario(
    kind: ScenarioKind,
    width: f64,
    height: f64,
    seed: u64,
) -> Result<EnvironmentSpec, EnvironmentError> {
    let obstacles = match kind {
        ScenarioKind::Empty => Vec::new(),
        ScenarioKind::Pillars(n) => {
            if !(1..=50).contains(&n) {
                return Err(EnvironmentError::InvalidParameter(format!("pillar count {n} outside [1, 50]")));
            }
            place_pillars(n, width, height, seed)?
        }
        ScenarioKind::Walls(shape) => wall_blueprint(shape, width, height)?,
        ScenarioKind::Crevices(gap) => {
            if !(0.25..=5.0).contains(&gap) {
                return Err(EnvironmentError::InvalidParameter(format!("crevice gap {gap} outside [0.25, 5.0]")));
            }
            crevice_bank(gap, width, height)?
        }
    };
    EnvironmentSpec::new(width, height, obstacles, kind)
}

const RESTART_AFTER_MISSES: usize = 500;

fn place_pillars(n: usize, width: f64, height: f64, seed: u64) -> Result<Vec<Obstacle>, EnvironmentError> {
    let lo = PILLAR_CLEARANCE;
    let (hi_x, hi_y) = (width - PILLAR_CLEARANCE - PILLAR_SIZE, height - PILLAR_CLEARANCE - PILLAR_SIZE);
    if hi_x < lo || hi_y < lo {
        return Err(EnvironmentError::Infeasible(format!("{width} x {height} room too small for pillars")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pillars: Vec<Obstacle> = Vec::with_capacity(n);
    let mut attempts = 0;
    let mut misses = 0;
    let mut most = 0;
    while pillars.len() < n {
        if attempts == MAX_PLACEMENT_ATTEMPTS {
            return Err(EnvironmentError::Infeasible(format!(
                "placed at most {most} of {n} pillars in {MAX_PLACEMENT_ATTEMPTS} attempts"
            )));
        }
        attempts += 1;
        // A jammed partial layout rarely unjams; start over instead.
        if misses == RESTART_AFTER_MISSES {
            pillars.clear();
            misses = 0;
        }
        let x = rng.random_range(lo..=hi_x);
        let y = rng.random_range(lo..=hi_y);
        let candidate = Obstacle::from_extent(x, y, x + PILLAR_SIZE, y + PILLAR_SIZE)?;
        if pillars.iter().all(|p| p.gap_to(&candidate) >= PILLAR_CLEARANCE) {
            pillars.push(candidate);
            most = most.max(pillars.len());
            misses = 0;
        } else {
            misses += 1;
        }
    }
    Ok(pillars)
}

fn wall_blueprint(shape: WallShape, w: f64, h: f64) -> Result<Vec<Obstacle>, EnvironmentError> {
    let t = WALL_THICKNESS;
    let half = 0.5 * t;
    let (x1, x2) = (w / 3.0, 2.0 * w / 3.0);
    let (y_lo, y_hi) = (0.2 * h, 0.8 * h);
    let slabs = match shape {
        WallShape::H => vec![
            (x1 - half, y_lo, x1 + half, y_hi),
            (x2 - half, y_lo, x2 + half, y_hi),
            (x1 + half, 0.5 * h - half, x2 - half, 0.5 * h + half),
        ],
        WallShape::Pi => vec![
            (x1 - half, y_lo, x1 + half, y_hi),
            (x2 - half, y_lo, x2 + half, y_hi),
            (x1 - half, y_hi, x2 + half, y_hi + t),
        ],
        WallShape::C => {
            let (l, r, b, top) = (0.3 * w, 0.7 * w, 0.3 * h, 0.7 * h);
            vec![(l, b, l + t, top), (l + t, top - t, r, top), (l + t, b, r, b + t)]
        }
        WallShape::ThreeRooms => vec![
            (0.0, h / 3.0 - half, 0.75 * w, h / 3.0 + half),
            (0.0, 2.0 * h / 3.0 - half, 0.75 * w, 2.0 * h / 3.0 + half),
        ],
    };
    slabs.into_iter().map(|(a, b, c, d)| Obstacle::from_extent(a, b, c, d)).collect()
}

fn crevice_bank(gap: f64, w: f64, h: f64) -> Result<Vec<Obstacle>, EnvironmentError> {
    const SLABS: usize = 4;
    const SLAB_HEIGHT: f64 = 1.0;
    let (x0, x1) = (0.2 * w, 0.8 * w);
    let y0 = 0.3 * h;
    let top = y0 + SLABS as f64 * SLAB_HEIGHT + (SLABS - 1) as f64 * gap;
    if top > h {
        return Err(EnvironmentError::Infeasible(format!(
            "crevice bank with gap {gap} reaches y = {top}, beyond height {h}"
        )));
    }
    (0..SLABS)
        .map(|k| {
            let y = y0 + k as f64 * (SLAB_HEIGHT + gap);
            Obstacle::from_extent(x0, y, x1, y + SLAB_HEIGHT)
        })
        .collect()
}
