use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use super::PlannerError;
use crate::world::{Cell, OccupancyGrid};
use crate::Vec3;

/// Ordered waypoints with their polyline length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointPath {
    pub waypoints: Vec<Vec3>,
    /// [m]
    pub cost: f64,
}

impl WaypointPath {
    pub fn from_points(waypoints: Vec<Vec3>) -> Self {
        let cost = polyline_length(&waypoints);
        Self { waypoints, cost }
    }
}

pub fn polyline_length(points: &[Vec3]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Euclidean distance between cell coordinates in metres.
pub fn heuristic(n: &Cell, goal: &Cell, resolution: f64) -> f64 {
    let d = |k: usize| (n[k] - goal[k]) as f64;
    (d(0) * d(0) + d(1) * d(1) + d(2) * d(2)).sqrt() * resolution
}

/// Cost of a 26-connected cell path, summed by move type so equal paths compare exactly.
pub fn cell_path_cost(cells: &[Cell], resolution: f64) -> f64 {
    let mut counts = [0u64; 3];
    for w in cells.windows(2) {
        let k = (0..3).filter(|&i| w[0][i] != w[1][i]).count();
        if k > 0 {
            counts[k - 1] += 1;
        }
    }
    (counts[0] as f64 + counts[1] as f64 * 2f64.sqrt() + counts[2] as f64 * 3f64.sqrt()) * resolution
}

pub(crate) const NEIGHBOURS: [([i64; 3], f64); 26] = {
    let mut out = [([0i64; 3], 0.0); 26];
    let mut n = 0;
    let mut dx = -1;
    while dx <= 1 {
        let mut dy = -1;
        while dy <= 1 {
            let mut dz = -1;
            while dz <= 1 {
                let k = (dx != 0) as i32 + (dy != 0) as i32 + (dz != 0) as i32;
                if k > 0 {
                    let c = match k {
                        1 => 1.0,
                        2 => std::f64::consts::SQRT_2,
                        _ => 1.732_050_807_568_877_2,
                    };
                    out[n] = ([dx, dy, dz], c);
                    n += 1;
                }
                dz += 1;
            }
            dy += 1;
        }
        dx += 1;
    }
    out
};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    h: f64,
    index: usize,
}

impl Eq for Open {}

impl Ord for Open {
    // reversed so BinaryHeap pops the smallest (f, h, index)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(other.h.total_cmp(&self.h))
            .then(other.index.cmp(&self.index))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimum-cost 26-connected cell path from `start` to `goal` on finite-cost cells.
pub fn a_star_cells(grid: &OccupancyGrid, start: Cell, goal: Cell) -> Result<Vec<Cell>, PlannerError> {
    let (Some(si), Some(gi)) = (grid.index(&start), grid.index(&goal)) else {
        return Err(PlannerError::InvalidEndpoint);
    };
    if !grid.is_free(&start) || !grid.is_free(&goal) {
        return Err(PlannerError::InvalidEndpoint);
    }
    let res = grid.resolution();
    let n = grid.num_cells();
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    g[si] = 0.0;
    let h0 = heuristic(&start, &goal, res);
    open.push(Open { f: h0, h: h0, index: si });

    while let Some(Open { index, .. }) = open.pop() {
        if closed[index] {
            continue;
        }
        closed[index] = true;
        if index == gi {
            let mut cells = vec![grid.cell_of_index(gi)];
            let mut cur = gi;
            while cur != si {
                cur = parent[cur];
                cells.push(grid.cell_of_index(cur));
            }
            cells.reverse();
            return Ok(cells);
        }
        let c = grid.cell_of_index(index);
        for (d, step) in NEIGHBOURS.iter() {
            let nb = [c[0] + d[0], c[1] + d[1], c[2] + d[2]];
            let Some(j) = grid.index(&nb) else { continue };
            if closed[j] || !grid.cost_index(j).is_finite() {
                continue;
            }
            let cand = g[index] + step * res * grid.cost_index(j);
            if cand < g[j] {
                g[j] = cand;
                parent[j] = index;
                let h = heuristic(&nb, &goal, res);
                open.push(Open { f: cand + h, h, index: j });
            }
        }
    }
    Err(PlannerError::NoPath)
}

/// [`a_star_cells`] returning cell centers and the exact path cost.
pub fn a_star(grid: &OccupancyGrid, start: Cell, goal: Cell) -> Result<WaypointPath, PlannerError> {
    let cells = a_star_cells(grid, start, goal)?;
    Ok(WaypointPath {
        waypoints: cells.iter().map(|c| grid.cell_center(c)).collect(),
        cost: cell_path_cost(&cells, grid.resolution()),
    })
}

/// Closest finite-cost cell to `from` by 26-connected breadth-first search,
/// ties broken by Euclidean distance then index.
pub fn nearest_free_cell(grid: &OccupancyGrid, from: Cell) -> Option<Cell> {
    let start = grid.index(&from)?;
    if grid.cost_index(start).is_finite() {
        return Some(from);
    }
    let mut seen = vec![false; grid.num_cells()];
    seen[start] = true;
    let mut frontier = VecDeque::from([start]);
    while !frontier.is_empty() {
        let mut found: Option<(f64, usize)> = None;
        let mut next = VecDeque::new();
        for i in frontier {
            let c = grid.cell_of_index(i);
            for (d, _) in NEIGHBOURS.iter() {
                let nb = [c[0] + d[0], c[1] + d[1], c[2] + d[2]];
                let Some(j) = grid.index(&nb) else { continue };
                if seen[j] {
                    continue;
                }
                seen[j] = true;
                if grid.cost_index(j).is_finite() {
                    let dist = heuristic(&nb, &from, 1.0);
                    if found.is_none_or(|(bd, bi)| dist < bd || (dist == bd && j < bi)) {
                        found = Some((dist, j));
                    }
                } else {
                    next.push_back(j);
                }
            }
        }
        if let Some((_, j)) = found {
            return Some(grid.cell_of_index(j));
        }
        frontier = next;
    }
    None
}
