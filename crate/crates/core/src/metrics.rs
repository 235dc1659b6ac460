//! Evaluation quantities: area coverage, average and cumulative distance
//! travelled, cell-area uniformity, drift/diffusion of the mean velocity and
//! kinetic energy accounting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::EnvironmentSpec;
use crate::exec::Execution;
use crate::geometry::Point2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("series of length {len} is too short for {bins} bins")]
    SeriesTooShort { len: usize, bins: usize },
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("bin count must be positive")]
    NoBins,
    #[error("grid resolution must be positive, got {0}")]
    BadResolution(f64),
}

/// Sample lattice over the environment bounds: one point at the center of
/// each `resolution`-sized cell, with points inside obstacles masked out.
#[derive(Debug, Clone)]
pub struct CoverageGrid {
    pub resolution: f64,
    nx: usize,
    ny: usize,
    free: Vec<bool>,
    free_count: usize,
}

impl CoverageGrid {
    pub fn new(env: &EnvironmentSpec, resolution: f64) -> Result<Self, MetricsError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(MetricsError::BadResolution(resolution));
        }
        let nx = ((env.width / resolution).round() as usize).max(1);
        let ny = ((env.height / resolution).round() as usize).max(1);
        let mut free = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                free.push(env.is_free(Self::point_at(resolution, i, j)));
            }
        }
        let free_count = free.iter().filter(|&&f| f).count();
        Ok(CoverageGrid { resolution, nx, ny, free, free_count })
    }

    #[inline]
    fn point_at(res: f64, i: usize, j: usize) -> Point2 {
        Point2::new((i as f64 + 0.5) * res, (j as f64 + 0.5) * res)
    }

    pub fn point(&self, i: usize, j: usize) -> Point2 {
        Self::point_at(self.resolution, i, j)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn free_count(&self) -> usize {
        self.free_count
    }

    pub fn is_free(&self, i: usize, j: usize) -> bool {
        self.free[j * self.nx + i]
    }

    /// Counts `(covered, total)` over free sample points accepted by
    /// `select`. A point is covered when some node lies within `r_s` of it
    /// (and, with `occlude`, the straight line to it misses every obstacle).
    pub fn count_covered<F>(
        &self,
        positions: &[Point2],
        r_s: f64,
        env: &EnvironmentSpec,
        occlude: bool,
        exec: Execution,
        select: F,
    ) -> (usize, usize)
    where
        F: Fn(Point2) -> bool + Sync + Send,
    {
        let res = self.resolution;
        let r_sq = r_s * r_s;
        let rows = exec.map_range(0..self.ny, |j| {
            let y = (j as f64 + 0.5) * res;
            let mut covered = vec![false; self.nx];
            for &p in positions {
                let dy = y - p.y;
                if dy.abs() > r_s {
                    continue;
                }
                let half = (r_sq - dy * dy).sqrt();
                let lo = (((p.x - half) / res - 0.5).floor().max(0.0)) as usize;
                let hi = ((((p.x + half) / res - 0.5).ceil()).max(0.0) as usize).min(self.nx.saturating_sub(1));
                for (i, slot) in covered.iter_mut().enumerate().take(hi + 1).skip(lo) {
                    if *slot {
                        continue;
                    }
                    let q = Point2::new((i as f64 + 0.5) * res, y);
                    if q.distance_sq(p) <= r_sq && (!occlude || env.segment_is_free(p, q)) {
                        *slot = true;
                    }
                }
            }
            let mut hits = 0usize;
            let mut total = 0usize;
            for (i, &c) in covered.iter().enumerate() {
                if !self.free[j * self.nx + i] {
                    continue;
                }
                let q = Point2::new((i as f64 + 0.5) * res, y);
                if select(q) {
                    total += 1;
                    hits += usize::from(c);
                }
            }
            (hits, total)
        });
        rows.into_iter().fold((0, 0), |(a, b), (h, t)| (a + h, b + t))
    }
}

/// Fraction of free area within `r_s` of at least one node, estimated on
/// `grid`. Overlaps count once.
pub fn pac(
    positions: &[Point2],
    r_s: f64,
    env: &EnvironmentSpec,
    grid: &CoverageGrid,
    occlude: bool,
    exec: Execution,
) -> f64 {
    if positions.is_empty() || grid.free_count() == 0 {
        return 0.0;
    }
    let (hits, total) = grid.count_covered(positions, r_s, env, occlude, exec, |_| true);
    hits as f64 / total as f64
}

/// Mean straight-line distance from `origin` to each node; `None` without
/// nodes.
pub fn adt(positions: &[Point2], origin: Point2) -> Option<f64> {
    if positions.is_empty() {
        return None;
    }
    Some(positions.iter().map(|p| p.distance(origin)).sum::<f64>() / positions.len() as f64)
}

/// One step of the cumulative distance recursion: previous value plus the
/// mean displacement over the `n_t` live nodes.
pub fn cdt_update(previous_cdt: f64, displacements: &[f64], n_t: usize) -> f64 {
    if n_t == 0 {
        return previous_cdt;
    }
    previous_cdt + displacements.iter().sum::<f64>() / n_t as f64
}

/// Coefficient of variation of cell areas (population standard deviation
/// over mean). `None` for an empty list.
pub fn uniformity(cell_areas: &[f64]) -> Option<f64> {
    if cell_areas.is_empty() {
        return None;
    }
    let n = cell_areas.len() as f64;
    let mean = cell_areas.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return None;
    }
    let var = cell_areas.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    Some(var.sqrt() / mean)
}

/// Mass-normalized kinetic energy `½ (d/Δt)²` of one move.
pub fn kinetic_energy_increment(displacement: f64, dt: f64) -> f64 {
    let v = displacement / dt;
    0.5 * v * v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftDiffusionBin {
    pub v_low: f64,
    pub v_high: f64,
    pub samples: usize,
    /// `⟨(v(t+δt) − v(t)) / δt⟩`; `None` for an empty bin.
    pub drift: Option<f64>,
    /// `½ ⟨(v(t+δt) − v(t))² / δt⟩`; `None` for an empty bin.
    pub diffusion: Option<f64>,
}

impl DriftDiffusionBin {
    pub fn v_center(&self) -> f64 {
        0.5 * (self.v_low + self.v_high)
    }
}

/// Empirical drift and diffusion coefficients of a velocity series sampled
/// every `delta_t`, conditioned on `v(t)` through `bins` equal-width bins
/// spanning the observed range of `v(t)`.
pub fn drift_diffusion(
    velocity_series: &[f64],
    delta_t: f64,
    bins: usize,
) -> Result<Vec<DriftDiffusionBin>, MetricsError> {
    if bins == 0 {
        return Err(MetricsError::NoBins);
    }
    if delta_t.is_nan() || delta_t <= 0.0 {
        return Err(MetricsError::NonPositiveStep(delta_t));
    }
    if velocity_series.len() < bins + 1 {
        return Err(MetricsError::SeriesTooShort { len: velocity_series.len(), bins });
    }
    let keys = &velocity_series[..velocity_series.len() - 1];
    let lo = keys.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = keys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut sum_d = vec![0.0; bins];
    let mut sum_d2 = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    for w in velocity_series.windows(2) {
        let b = if width > 0.0 { (((w[0] - lo) / width) as usize).min(bins - 1) } else { 0 };
        let inc = w[1] - w[0];
        sum_d[b] += inc / delta_t;
        sum_d2[b] += inc * inc / delta_t;
        count[b] += 1;
    }
    Ok((0..bins)
        .map(|b| {
            let n = count[b];
            DriftDiffusionBin {
                v_low: lo + width * b as f64,
                v_high: lo + width * (b + 1) as f64,
                samples: n,
                drift: (n > 0).then(|| sum_d[b] / n as f64),
                diffusion: (n > 0).then(|| 0.5 * sum_d2[b] / n as f64),
            }
        })
        .collect())
}

/// Max minus min of the non-empty diffusion estimates.
pub fn diffusion_spread(bins: &[DriftDiffusionBin]) -> Option<f64> {
    let values: Vec<f64> = bins.iter().filter_map(|b| b.diffusion).collect();
    if values.is_empty() {
        return None;
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(hi - lo)
}

/// Per-tick snapshot of the evaluation metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub tick: u64,
    pub pac: f64,
    pub adt: Option<f64>,
    pub cdt: f64,
    pub u_a: Option<f64>,
    pub mean_velocity: f64,
    pub active_nodes: usize,
    pub injected_count: usize,
    /// Cumulative mass-normalized kinetic energy per injected node, by id.
    pub per_node_energy: Vec<f64>,
}

/// First tick whose PAC reaches `fraction`.
pub fn ticks_to_fraction(series: &[MetricsRecord], fraction: f64) -> Option<u64> {
    series.iter().find(|r| r.pac >= fraction).map(|r| r.tick)
}
