//! Planar primitives: points, CCW polygons, half-planes and disks, plus the
//! shoelace area/centroid formulas and convex half-plane clipping used to
//! build restricted Voronoi cells.

use std::f64::consts::TAU;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for geometric comparisons, in meters.
pub const EPS: f64 = 1e-9;

/// Areas below this are treated as degenerate, in square meters.
pub const AREA_EPS: f64 = 1e-12;

/// Smallest vertex count accepted when discretizing a disk.
pub const MIN_DISK_VERTICES: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate geometry: {0}")]
    Degenerate(&'static str),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("disk discretization needs at least {MIN_DISK_VERTICES} vertices, got {0}")]
    TooFewVertices(usize),
    #[error("disk radius must be positive, got {0}")]
    NonPositiveRadius(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 2-D cross product.
    #[inline]
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    #[inline]
    pub fn distance_sq(self, other: Point2) -> f64 {
        let d = self - other;
        d.dot(d)
    }

    #[inline]
    pub fn midpoint(self, other: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        self + (other - self) * t
    }

    pub fn from_polar(radius: f64, angle: f64) -> Point2 {
        Point2::new(radius * angle.cos(), radius * angle.sin())
    }
}

impl Add for Point2 {
    type Output = Point2;
    #[inline]
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    #[inline]
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    #[inline]
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    #[inline]
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Raw shoelace half-sum over `vertices` with wraparound. Positive for
/// counter-clockwise order, negative for clockwise.
pub fn signed_area(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    if n < 3 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        sum += a.x * b.y - b.x * a.y;
    }
    0.5 * sum
}

/// A simple polygon stored counter-clockwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polygon {
    vertices: Vec<Point2>,
}

impl Polygon {
    /// Validates and CCW-normalizes a vertex ring.
    pub fn new(mut vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        dedup_ring(&mut vertices);
        if vertices.len() < 3 {
            return Err(GeometryError::Degenerate("polygon needs at least 3 distinct vertices"));
        }
        let area = signed_area(&vertices);
        if area.abs() <= AREA_EPS {
            return Err(GeometryError::Degenerate("polygon has zero area"));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        if !is_simple(&vertices) {
            return Err(GeometryError::Degenerate("polygon edges self-intersect"));
        }
        Ok(Polygon { vertices })
    }

    /// Builds from a ring already known to be CCW, simple and non-degenerate
    /// (e.g. the output of convex clipping).
    pub(crate) fn from_ccw_unchecked(vertices: Vec<Point2>) -> Self {
        debug_assert!(vertices.len() >= 3);
        Polygon { vertices }
    }

    /// Axis-aligned rectangle from two opposite corners.
    pub fn rectangle(min: Point2, max: Point2) -> Result<Self, GeometryError> {
        Polygon::new(vec![min, Point2::new(max.x, min.y), max, Point2::new(min.x, max.y)])
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> f64 {
        polygon_area(self)
    }

    /// Point-in-convex-polygon test; boundary counts as inside within `EPS`.
    pub fn contains_convex(&self, p: Point2) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let edge = b - a;
            edge.cross(p - a) >= -EPS * edge.norm()
        })
    }

    /// Even-odd point-in-polygon test for arbitrary simple polygons.
    pub fn contains(&self, p: Point2) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[j];
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }
}

fn dedup_ring(vertices: &mut Vec<Point2>) {
    vertices.dedup_by(|a, b| a.distance(*b) <= EPS);
    while vertices.len() > 1 && vertices[0].distance(vertices[vertices.len() - 1]) <= EPS {
        vertices.pop();
    }
}

fn segments_cross(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let d1 = (b - a).cross(c - a);
    let d2 = (b - a).cross(d - a);
    let d3 = (d - c).cross(a - c);
    let d4 = (d - c).cross(b - c);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn is_simple(vertices: &[Point2]) -> bool {
    let n = vertices.len();
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let c = vertices[j];
            let d = vertices[(j + 1) % n];
            if segments_cross(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Boundary line through `anchor`; the kept side is where `inward_normal`
/// points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    pub anchor: Point2,
    pub inward_normal: Point2,
}

impl HalfPlane {
    pub fn new(anchor: Point2, normal: Point2) -> Result<Self, GeometryError> {
        if !anchor.is_finite() || !normal.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        let len = normal.norm();
        if len <= EPS {
            return Err(GeometryError::Degenerate("half-plane normal has zero length"));
        }
        Ok(HalfPlane { anchor, inward_normal: normal * (1.0 / len) })
    }

    /// Signed distance, positive on the kept side.
    #[inline]
    pub fn signed_distance(&self, p: Point2) -> f64 {
        (p - self.anchor).dot(self.inward_normal)
    }

    #[inline]
    pub fn contains(&self, p: Point2) -> bool {
        self.signed_distance(p) >= 0.0
    }

    /// The complementary half-plane sharing the same boundary.
    pub fn flipped(&self) -> HalfPlane {
        HalfPlane { anchor: self.anchor, inward_normal: -self.inward_normal }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Point2,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Point2, radius: f64) -> Result<Self, GeometryError> {
        if !center.is_finite() || !radius.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if radius <= 0.0 {
            return Err(GeometryError::NonPositiveRadius(radius));
        }
        Ok(Disk { center, radius })
    }

    pub fn contains(&self, p: Point2) -> bool {
        self.center.distance_sq(p) <= self.radius * self.radius
    }
}

/// Shoelace area `½ Σ (x_i y_{i+1} − x_{i+1} y_i)`.
pub fn polygon_area(p: &Polygon) -> f64 {
    signed_area(&p.vertices)
}

/// Center of mass via the shoelace moments
/// `Cx = Σ (x_i + x_{i+1}) m(i) / (6 A)`, `Cy` likewise.
pub fn polygon_centroid(p: &Polygon) -> Result<Point2, GeometryError> {
    let v = &p.vertices;
    let n = v.len();
    // Shift to the first vertex so the moments stay well conditioned far
    // from the origin.
    let base = v[0];
    let mut area2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..n {
        let a = v[i] - base;
        let b = v[(i + 1) % n] - base;
        let m = a.x * b.y - b.x * a.y;
        area2 += m;
        cx += (a.x + b.x) * m;
        cy += (a.y + b.y) * m;
    }
    let area = 0.5 * area2;
    if area <= AREA_EPS {
        return Err(GeometryError::Degenerate("centroid of a zero-area polygon"));
    }
    Ok(Point2::new(base.x + cx / (6.0 * area), base.y + cy / (6.0 * area)))
}

/// Area-weighted mean of part centroids.
pub fn composite_centroid(parts: &[(Point2, f64)]) -> Result<Point2, GeometryError> {
    if parts.is_empty() {
        return Err(GeometryError::Degenerate("composite centroid of no parts"));
    }
    let mut total = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for &(c, a) in parts {
        if a.is_nan() || a <= 0.0 {
            return Err(GeometryError::Degenerate("composite part with non-positive area"));
        }
        total += a;
        sx += c.x * a;
        sy += c.y * a;
    }
    if total <= AREA_EPS {
        return Err(GeometryError::Degenerate("composite centroid with zero total area"));
    }
    Ok(Point2::new(sx / total, sy / total))
}

/// Sutherland–Hodgman against a single half-plane. `None` when nothing of
/// `p` remains on the inward side.
pub fn clip_halfplane(p: &Polygon, h: &HalfPlane) -> Option<Polygon> {
    let v = &p.vertices;
    let n = v.len();
    let dists: Vec<f64> = v.iter().map(|&q| h.signed_distance(q)).collect();
    if dists.iter().all(|&d| d >= 0.0) {
        return Some(p.clone());
    }
    if dists.iter().all(|&d| d <= 0.0) {
        return None;
    }
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let j = (i + 1) % n;
        let (a, b) = (v[i], v[j]);
        let (da, db) = (dists[i], dists[j]);
        if da >= 0.0 {
            out.push(a);
        }
        if (da > 0.0 && db < 0.0) || (da < 0.0 && db > 0.0) {
            let t = da / (da - db);
            out.push(a.lerp(b, t));
        }
    }
    dedup_ring(&mut out);
    if out.len() < 3 || signed_area(&out) <= AREA_EPS {
        return None;
    }
    Some(Polygon::from_ccw_unchecked(out))
}

/// Regular `k`-gon inscribed in a circle, first vertex at angle 0.
pub fn regular_polygon(center: Point2, radius: f64, k: usize) -> Result<Polygon, GeometryError> {
    if k < 3 {
        return Err(GeometryError::Degenerate("regular polygon needs k >= 3"));
    }
    Disk::new(center, radius)?;
    let step = TAU / k as f64;
    let vertices = (0..k).map(|i| center + Point2::from_polar(radius, step * i as f64)).collect();
    Ok(Polygon::from_ccw_unchecked(vertices))
}

/// Polygonal stand-in for a disk: the inscribed regular `k`-gon, `k >= 8`.
pub fn disk_to_polygon(d: &Disk, k: usize) -> Result<Polygon, GeometryError> {
    if k < MIN_DISK_VERTICES {
        return Err(GeometryError::TooFewVertices(k));
    }
    regular_polygon(d.center, d.radius, k)
}

/// Half-plane of points closer to `a` than to `b`.
pub fn perpendicular_bisector(a: Point2, b: Point2) -> Result<HalfPlane, GeometryError> {
    if a.distance(b) <= EPS {
        return Err(GeometryError::Degenerate("bisector of coincident points"));
    }
    HalfPlane::new(a.midpoint(b), a - b)
}
