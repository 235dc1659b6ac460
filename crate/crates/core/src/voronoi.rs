//! Restricted Voronoi cells: the sensing disk cut by perpendicular bisectors
//! to perceived neighbours and by the room walls, with nearby obstacle bodies
//! carved out.
//!
//! Obstacles are removed by vertical slab decomposition: the region is split
//! along the two vertical lines through the obstacle's x-extent, and the
//! middle band keeps only what lies below and above the obstacle. Every
//! piece stays convex, so the centroid is the area-weighted mean of the
//! piece centroids.

use serde::Serialize;
use thiserror::Error;

use crate::environment::{EnvironmentSpec, Obstacle};
use crate::geometry::{
    clip_halfplane, composite_centroid, disk_to_polygon, perpendicular_bisector, polygon_area, polygon_centroid, Disk,
    GeometryError, HalfPlane, Point2, Polygon, EPS,
};
use crate::perception::PerceivedNeighbor;
use crate::NodeId;

/// Vertex count of the polygon standing in for a sensing disk.
pub const DISK_VERTICES: usize = 64;

/// Clearance kept from obstacles when a centroid has to be projected back
/// into free space, in meters.
pub const CENTROID_CLEARANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CellError {
    #[error("cell of node {0} is empty")]
    Empty(NodeId),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoronoiCell {
    pub owner_id: NodeId,
    /// Disjoint convex pieces whose union is the cell.
    pub region: Vec<Polygon>,
    pub centroid: Point2,
    pub area: f64,
}

impl VoronoiCell {
    pub fn contains(&self, p: Point2) -> bool {
        self.region.iter().any(|piece| piece.contains_convex(p))
    }
}

#[inline]
fn vertical(x: f64, keep_left: bool) -> HalfPlane {
    let nx = if keep_left { -1.0 } else { 1.0 };
    HalfPlane { anchor: Point2::new(x, 0.0), inward_normal: Point2::new(nx, 0.0) }
}

#[inline]
fn horizontal(y: f64, keep_below: bool) -> HalfPlane {
    let ny = if keep_below { -1.0 } else { 1.0 };
    HalfPlane { anchor: Point2::new(0.0, y), inward_normal: Point2::new(0.0, ny) }
}

fn bbox(p: &Polygon) -> (Point2, Point2) {
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in p.vertices() {
        lo = Point2::new(lo.x.min(v.x), lo.y.min(v.y));
        hi = Point2::new(hi.x.max(v.x), hi.y.max(v.y));
    }
    (lo, hi)
}

/// `p` minus the rectangle `o`, as up to four convex pieces.
pub fn subtract_obstacle(p: &Polygon, o: &Obstacle) -> Vec<Polygon> {
    let (lo, hi) = bbox(p);
    if hi.x <= o.min_corner.x || lo.x >= o.max_corner.x || hi.y <= o.min_corner.y || lo.y >= o.max_corner.y {
        return vec![p.clone()];
    }
    let mut out = Vec::with_capacity(4);
    out.extend(clip_halfplane(p, &vertical(o.min_corner.x, true)));
    out.extend(clip_halfplane(p, &vertical(o.max_corner.x, false)));
    let band = clip_halfplane(p, &vertical(o.min_corner.x, false))
        .and_then(|b| clip_halfplane(&b, &vertical(o.max_corner.x, true)));
    if let Some(band) = band {
        out.extend(clip_halfplane(&band, &horizontal(o.min_corner.y, true)));
        out.extend(clip_halfplane(&band, &horizontal(o.max_corner.y, false)));
    }
    out
}

/// Builds the restricted cell of the node at `owner`.
///
/// Bisectors use perceived neighbour positions against the owner's true
/// position; a neighbour perceived within `EPS` of the owner is skipped.
/// `planes` are extra convex constraints (typically the room walls) and
/// `obstacles` are carved out of the result.
pub fn restricted_cell(
    owner_id: NodeId,
    owner: Point2,
    neighbors: &[PerceivedNeighbor],
    planes: &[HalfPlane],
    obstacles: &[Obstacle],
    r_s: f64,
) -> Result<VoronoiCell, CellError> {
    let mut poly = disk_to_polygon(&Disk::new(owner, r_s)?, DISK_VERTICES)?;
    for n in neighbors {
        if n.perceived_position.distance(owner) <= EPS {
            continue;
        }
        let h = perpendicular_bisector(owner, n.perceived_position)?;
        poly = clip_halfplane(&poly, &h).ok_or(CellError::Empty(owner_id))?;
    }
    for h in planes {
        poly = clip_halfplane(&poly, h).ok_or(CellError::Empty(owner_id))?;
    }
    let mut region = vec![poly];
    for o in obstacles {
        region = region.iter().flat_map(|piece| subtract_obstacle(piece, o)).collect();
    }
    if region.is_empty() {
        return Err(CellError::Empty(owner_id));
    }
    let parts: Vec<(Point2, f64)> = region
        .iter()
        .map(|piece| Ok((polygon_centroid(piece)?, polygon_area(piece))))
        .collect::<Result<_, GeometryError>>()?;
    let area = parts.iter().map(|&(_, a)| a).sum();
    let centroid = composite_centroid(&parts)?;
    Ok(VoronoiCell { owner_id, region, centroid, area })
}

/// Where the owner should move: the cell centroid, projected back into free
/// space (with `CENTROID_CLEARANCE`) if it landed in an obstacle or outside
/// the room.
pub fn target_centroid(cell: &VoronoiCell, env: &EnvironmentSpec) -> Point2 {
    if env.is_free(cell.centroid) {
        cell.centroid
    } else {
        env.nearest_free_point(cell.centroid, CENTROID_CLEARANCE)
    }
}
