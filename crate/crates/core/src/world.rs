//! Static boxes, moving spherical obstacles and the occupancy grid with a
//! safety-inflated cost layer.
//!
//! Grid cells are half-open boxes `[i*res, (i+1)*res)` with the grid origin at
//! the world origin. Blocked cells carry infinite cost and free cells the unit
//! standard cost.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::perception::Detection;
use crate::Vec3;

/// Traversal cost of a free cell.
pub const STANDARD_COST: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorldError {
    #[error("grid has a zero dimension: {0:?}")]
    EmptyGrid([usize; 3]),
    #[error("grid resolution must be positive, got {0}")]
    BadResolution(f64),
    #[error("invalid box: min corner {min:?} exceeds max corner {max:?}")]
    InvalidAabb { min: [f64; 3], max: [f64; 3] },
    #[error("invalid dynamic obstacle {id}: {reason}")]
    InvalidObstacle { id: u32, reason: String },
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min_corner: Vec3,
    pub max_corner: Vec3,
}

impl Aabb {
    pub fn new(min_corner: Vec3, max_corner: Vec3) -> Result<Self, WorldError> {
        let b = Self { min_corner, max_corner };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let ok = (0..3).all(|k| {
            self.min_corner[k].is_finite()
                && self.max_corner[k].is_finite()
                && self.min_corner[k] <= self.max_corner[k]
        });
        if ok {
            Ok(())
        } else {
            Err(WorldError::InvalidAabb {
                min: self.min_corner.into(),
                max: self.max_corner.into(),
            })
        }
    }

    pub fn center(&self) -> Vec3 {
        0.5 * (self.min_corner + self.max_corner)
    }

    pub fn half_diagonal(&self) -> f64 {
        0.5 * (self.max_corner - self.min_corner).norm()
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min_corner[k] && p[k] <= self.max_corner[k])
    }

    /// Signed Euclidean distance to the surface; negative inside.
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        let c = self.center();
        let h = 0.5 * (self.max_corner - self.min_corner);
        let q = (p - c).abs() - h;
        let outside = q.map(|v| v.max(0.0)).norm();
        let inside = q.max().min(0.0);
        outside + inside
    }
}

/// Motion law of a dynamic obstacle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MotionModel {
    /// Constant-speed loop through `points`, closing back to the first point.
    WaypointLoop { points: Vec<Vec3>, speed: f64 },
    /// `center + amplitude ∘ sin(2πt/period)` per axis.
    Sinusoid { center: Vec3, amplitude: Vec3, period: f64 },
    /// Constant velocity from the initial position, reflecting off the bounce box.
    Linear { velocity: Vec3, bounce_min: Vec3, bounce_max: Vec3 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicObstacleSpec {
    pub id: u32,
    /// Start point of the linear model; informational for the periodic models.
    #[serde(default)]
    pub initial_position: Vec3,
    #[serde(default = "default_obstacle_radius")]
    pub radius: f64,
    pub motion: MotionModel,
}

fn default_obstacle_radius() -> f64 {
    2.0
}

impl DynamicObstacleSpec {
    pub fn validate(&self) -> Result<(), WorldError> {
        let fail = |reason: &str| WorldError::InvalidObstacle { id: self.id, reason: reason.into() };
        if !(self.radius > 0.0) {
            return Err(fail("radius must be positive"));
        }
        match &self.motion {
            MotionModel::WaypointLoop { points, speed } => {
                if points.len() < 2 {
                    return Err(fail("waypoint loop needs at least two points"));
                }
                if !(*speed > 0.0) {
                    return Err(fail("speed must be positive"));
                }
                if loop_length(points) <= 0.0 {
                    return Err(fail("waypoint loop has zero length"));
                }
            }
            MotionModel::Sinusoid { period, .. } => {
                if !(*period > 0.0) {
                    return Err(fail("period must be positive"));
                }
            }
            MotionModel::Linear { bounce_min, bounce_max, .. } => {
                let inside = (0..3).all(|k| {
                    bounce_min[k] <= self.initial_position[k]
                        && self.initial_position[k] <= bounce_max[k]
                });
                if !inside {
                    return Err(fail("initial position outside the bounce box"));
                }
            }
        }
        Ok(())
    }
}

fn loop_length(points: &[Vec3]) -> f64 {
    (0..points.len()).map(|i| (points[(i + 1) % points.len()] - points[i]).norm()).sum()
}

/// Position and velocity of a dynamic obstacle at time `t`.
pub fn dynamic_obstacle_position(spec: &DynamicObstacleSpec, t: f64) -> (Vec3, Vec3) {
    match &spec.motion {
        MotionModel::Sinusoid { center, amplitude, period } => {
            let w = TAU / period;
            let (s, c) = (w * t).sin_cos();
            (center + amplitude * s, amplitude * (w * c))
        }
        MotionModel::Linear { velocity, bounce_min, bounce_max } => {
            let mut p = Vec3::zeros();
            let mut v = Vec3::zeros();
            for k in 0..3 {
                let (pk, vk) = reflect(
                    spec.initial_position[k],
                    velocity[k],
                    bounce_min[k],
                    bounce_max[k],
                    t,
                );
                p[k] = pk;
                v[k] = vk;
            }
            (p, v)
        }
        MotionModel::WaypointLoop { points, speed } => {
            let n = points.len();
            let total = loop_length(points);
            let mut s = (speed * t).rem_euclid(total);
            for i in 0..n {
                let a = points[i];
                let b = points[(i + 1) % n];
                let len = (b - a).norm();
                if len == 0.0 {
                    continue;
                }
                if s <= len || i == n - 1 {
                    let dir = (b - a) / len;
                    return (a + dir * s.min(len), dir * *speed);
                }
                s -= len;
            }
            (points[0], Vec3::zeros())
        }
    }
}

/// One axis of straight-line motion folded into `[lo, hi]`.
fn reflect(p0: f64, v: f64, lo: f64, hi: f64, t: f64) -> (f64, f64) {
    let span = hi - lo;
    if span <= 0.0 || v == 0.0 {
        return (p0.clamp(lo, hi.max(lo)), 0.0);
    }
    let m = (p0 - lo + v * t).rem_euclid(2.0 * span);
    if m <= span {
        (lo + m, v)
    } else {
        (lo + 2.0 * span - m, -v)
    }
}

/// Static and dynamic obstacle ground truth.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WorldModel {
    pub static_obstacles: Vec<Aabb>,
    pub dynamic_obstacles: Vec<DynamicObstacleSpec>,
}

impl WorldModel {
    /// Signed distance from `point` to the nearest obstacle surface at time `t`;
    /// `+inf` in an empty world.
    pub fn min_clearance(&self, point: &Vec3, t: f64) -> f64 {
        min_clearance(point, self, t)
    }
}

/// Signed distance from `point` to the nearest static box or dynamic sphere at time `t`.
pub fn min_clearance(point: &Vec3, world: &WorldModel, t: f64) -> f64 {
    let s = world
        .static_obstacles
        .iter()
        .map(|b| b.signed_distance(point))
        .fold(f64::INFINITY, f64::min);
    world
        .dynamic_obstacles
        .iter()
        .map(|o| (dynamic_obstacle_position(o, t).0 - point).norm() - o.radius)
        .fold(s, f64::min)
}

/// Integer cell coordinates.
pub type Cell = [i64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Cell edge length [m]
    pub resolution: f64,
    pub dims: [usize; 3],
}

impl GridSpec {
    /// Smallest grid covering `[0, extent]` at `resolution`.
    pub fn covering(extent: &Vec3, resolution: f64) -> Self {
        let d = |e: f64| ((e / resolution) - 1e-9).ceil().max(0.0) as usize;
        Self { resolution, dims: [d(extent.x), d(extent.y), d(extent.z)] }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if !(self.resolution > 0.0) || !self.resolution.is_finite() {
            return Err(WorldError::BadResolution(self.resolution));
        }
        if self.dims.contains(&0) {
            return Err(WorldError::EmptyGrid(self.dims));
        }
        Ok(())
    }

    pub fn num_cells(&self) -> usize {
        self.dims.iter().product()
    }
}

/// Occupancy grid with a cost layer inflated by a safety radius.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    spec: GridSpec,
    occupied: Vec<bool>,
    cost: Vec<f64>,
    inflation: f64,
    /// Cell offsets whose center lies within the inflation radius.
    offsets: Vec<[i64; 3]>,
}

impl OccupancyGrid {
    pub fn empty(spec: GridSpec) -> Result<Self, WorldError> {
        spec.validate()?;
        let n = spec.num_cells();
        Ok(Self {
            spec,
            occupied: vec![false; n],
            cost: vec![STANDARD_COST; n],
            inflation: 0.0,
            offsets: vec![[0, 0, 0]],
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn resolution(&self) -> f64 {
        self.spec.resolution
    }

    pub fn dims(&self) -> [usize; 3] {
        self.spec.dims
    }

    pub fn num_cells(&self) -> usize {
        self.occupied.len()
    }

    pub fn inflation_radius(&self) -> f64 {
        self.inflation
    }

    pub fn in_bounds(&self, c: &Cell) -> bool {
        (0..3).all(|k| c[k] >= 0 && (c[k] as usize) < self.spec.dims[k])
    }

    /// Linear index `(x * ny + y) * nz + z`.
    pub fn index(&self, c: &Cell) -> Option<usize> {
        self.in_bounds(c).then(|| {
            let [_, ny, nz] = self.spec.dims;
            (c[0] as usize * ny + c[1] as usize) * nz + c[2] as usize
        })
    }

    pub fn cell_of_index(&self, i: usize) -> Cell {
        let [_, ny, nz] = self.spec.dims;
        [(i / (ny * nz)) as i64, ((i / nz) % ny) as i64, (i % nz) as i64]
    }

    /// Cell containing `p`, or `None` outside the grid.
    pub fn cell_of(&self, p: &Vec3) -> Option<Cell> {
        let r = self.spec.resolution;
        let c = [(p.x / r).floor() as i64, (p.y / r).floor() as i64, (p.z / r).floor() as i64];
        self.in_bounds(&c).then_some(c)
    }

    /// Cell containing `p` after clamping it into the grid.
    pub fn clamped_cell_of(&self, p: &Vec3) -> Cell {
        let r = self.spec.resolution;
        let mut c = [0i64; 3];
        for k in 0..3 {
            c[k] = ((p[k] / r).floor() as i64).clamp(0, self.spec.dims[k] as i64 - 1);
        }
        c
    }

    pub fn cell_center(&self, c: &Cell) -> Vec3 {
        let r = self.spec.resolution;
        Vec3::new((c[0] as f64 + 0.5) * r, (c[1] as f64 + 0.5) * r, (c[2] as f64 + 0.5) * r)
    }

    pub fn cell_box(&self, c: &Cell) -> Aabb {
        let r = self.spec.resolution;
        let lo = Vec3::new(c[0] as f64 * r, c[1] as f64 * r, c[2] as f64 * r);
        Aabb { min_corner: lo, max_corner: lo + Vec3::repeat(r) }
    }

    pub fn is_occupied(&self, c: &Cell) -> bool {
        self.index(c).is_some_and(|i| self.occupied[i])
    }

    pub fn is_occupied_index(&self, i: usize) -> bool {
        self.occupied[i]
    }

    /// Cost of a cell; out-of-bounds cells are infinite.
    pub fn cost(&self, c: &Cell) -> f64 {
        self.index(c).map_or(f64::INFINITY, |i| self.cost[i])
    }

    pub fn cost_index(&self, i: usize) -> f64 {
        self.cost[i]
    }

    pub fn is_free(&self, c: &Cell) -> bool {
        self.cost(c).is_finite()
    }

    pub fn occupied_cells(&self) -> BTreeSet<usize> {
        (0..self.occupied.len()).filter(|&i| self.occupied[i]).collect()
    }

    pub fn blocked_count(&self) -> usize {
        self.cost.iter().filter(|c| c.is_infinite()).count()
    }

    /// Marks a cell occupied; returns true if it was free before.
    pub fn occupy(&mut self, c: &Cell) -> bool {
        match self.index(c) {
            Some(i) if !self.occupied[i] => {
                self.occupied[i] = true;
                self.inflate_around(i);
                true
            }
            _ => false,
        }
    }

    fn inflate_around(&mut self, i: usize) {
        let c = self.cell_of_index(i);
        for o in &self.offsets {
            let n = [c[0] + o[0], c[1] + o[1], c[2] + o[2]];
            if let Some(j) = self.index(&n) {
                self.cost[j] = f64::INFINITY;
            }
        }
    }

    fn set_inflation(&mut self, r: f64) {
        let r_cells = r / self.spec.resolution;
        let w = r_cells.floor() as i64;
        let lim = r_cells * r_cells + 1e-9;
        self.inflation = r;
        self.offsets.clear();
        for dx in -w..=w {
            for dy in -w..=w {
                for dz in -w..=w {
                    if ((dx * dx + dy * dy + dz * dz) as f64) <= lim {
                        self.offsets.push([dx, dy, dz]);
                    }
                }
            }
        }
    }
}

/// Grid whose cells are occupied exactly where their half-open box overlaps an obstacle.
pub fn rasterize_static(obstacles: &[Aabb], spec: &GridSpec) -> Result<OccupancyGrid, WorldError> {
    let mut grid = OccupancyGrid::empty(*spec)?;
    let r = spec.resolution;
    for b in obstacles {
        b.validate()?;
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for k in 0..3 {
            let a = (b.min_corner[k] / r).floor() as i64;
            let z = ((b.max_corner[k] / r).ceil() as i64).max(a + 1);
            lo[k] = a.max(0);
            hi[k] = z.min(spec.dims[k] as i64);
        }
        for x in lo[0]..hi[0] {
            for y in lo[1]..hi[1] {
                for z in lo[2]..hi[2] {
                    let i = grid.index(&[x, y, z]).expect("clipped to bounds");
                    grid.occupied[i] = true;
                    grid.cost[i] = f64::INFINITY;
                }
            }
        }
    }
    Ok(grid)
}

/// Marks every cell whose center lies within `r` of an occupied cell's center as
/// infinite cost. Replaces any earlier inflation.
pub fn inflate_safety(grid: &OccupancyGrid, r: f64) -> OccupancyGrid {
    let mut out = grid.clone();
    out.set_inflation(r.max(0.0));
    out.cost.iter_mut().for_each(|c| *c = STANDARD_COST);
    for i in 0..out.occupied.len() {
        if out.occupied[i] {
            out.inflate_around(i);
        }
    }
    out
}

/// Adds detected obstacles (as spheres) to the grid. Returns the updated grid and
/// the sorted indices of cells that turned from free to occupied. Inflation is
/// refreshed only around the new cells.
pub fn integrate_detections(
    grid: &OccupancyGrid,
    detections: &[Detection],
) -> (OccupancyGrid, Vec<usize>) {
    let mut out = grid.clone();
    let mut added = BTreeSet::new();
    let r = grid.spec.resolution;
    for d in detections {
        if !d.position.iter().all(|v| v.is_finite()) || !(d.radius >= 0.0) {
            log::warn!("ignoring malformed detection {:?}", d);
            continue;
        }
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        let mut clipped = false;
        for k in 0..3 {
            let a = ((d.position[k] - d.radius) / r).floor() as i64;
            let b = ((d.position[k] + d.radius) / r).floor() as i64;
            lo[k] = a.max(0);
            hi[k] = b.min(grid.spec.dims[k] as i64 - 1);
            clipped |= a < 0 || b >= grid.spec.dims[k] as i64;
        }
        if clipped {
            log::debug!("detection at {:?} clipped to grid bounds", d.position.as_slice());
        }
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    let c = [x, y, z];
                    if out.cell_box(&c).signed_distance(&d.position) < d.radius && out.occupy(&c) {
                        added.insert(out.index(&c).expect("in bounds"));
                    }
                }
            }
        }
    }
    (out, added.into_iter().collect())
}
