//! Global path planning: A* on the inflated grid, line-of-sight pruning,
//! trapezoidal timing and cubic spline references.

mod astar;
mod prune;
mod spline;
mod timing;

pub use astar::{a_star, a_star_cells, cell_path_cost, heuristic, nearest_free_cell, polyline_length, WaypointPath};
pub use prune::{prune_line_of_sight, segment_cells, segment_is_free};
pub use spline::{fit_cubic_spline, fit_timed_spline, sample_reference, DesiredState, SplineTrajectory, TimeLaw};
pub use timing::{arc_lengths, time_allocate, TrapezoidProfile};

use serde::{Deserialize, Serialize};

use crate::world::OccupancyGrid;
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlannerError {
    #[error("no path to the goal")]
    NoPath,
    #[error("start or goal is out of bounds or blocked")]
    InvalidEndpoint,
    #[error("knot sequence is not strictly increasing")]
    DegenerateKnots,
    #[error("not enough waypoints for a spline")]
    TooFewWaypoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerParams {
    /// [m/s]
    pub v_max: f64,
    /// [m/s²]
    pub a_max: f64,
    /// Longest straight span left between spline knots [m]
    pub max_segment: f64,
    /// Arc-length spacing used to check the spline against the grid [m]
    pub check_step: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self { v_max: 2.0, a_max: 1.0, max_segment: 4.0, check_step: 0.25 }
    }
}

/// Result of one planning pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    /// A* output with exact endpoints.
    pub raw: WaypointPath,
    /// Waypoints the spline passes through.
    pub knots: WaypointPath,
    pub trajectory: SplineTrajectory,
}

fn subdivide(points: &[Vec3], max_len: f64) -> Vec<Vec3> {
    let mut out = vec![points[0]];
    for w in points.windows(2) {
        let n = ((w[1] - w[0]).norm() / max_len).ceil().max(1.0) as usize;
        for k in 1..=n {
            out.push(w[0] + (w[1] - w[0]) * (k as f64 / n as f64));
        }
    }
    out
}

/// Segments (by knot index) whose sampled spline enters a blocked cell.
fn colliding_segments(traj: &SplineTrajectory, grid: &OccupancyGrid, step: f64, skip_first: bool) -> Vec<usize> {
    let u = traj.knot_params();
    let mut bad = Vec::new();
    for i in 0..traj.num_segments() {
        if (skip_first && i == 0) || u.len() < 2 {
            continue;
        }
        let n = ((u[i + 1] - u[i]) / step).ceil().max(1.0) as usize;
        let hit = (0..=n).any(|k| {
            let p = traj.eval_segment(i, u[i] + (u[i + 1] - u[i]) * k as f64 / n as f64).0;
            grid.cell_of(&p).is_none_or(|c| !grid.is_free(&c))
        });
        if hit {
            bad.push(i);
        }
    }
    bad
}

/// Plans a timed reference from `start` to `goal` on `grid`.
///
/// A start inside the inflated region escapes to the nearest free cell first.
/// After pruning, knots are added on the straight spans wherever the spline
/// would cut through a blocked cell.
pub fn plan_path(grid: &OccupancyGrid, start: &Vec3, goal: &Vec3, params: &PlannerParams) -> Result<Plan, PlannerError> {
    let goal_cell = grid.cell_of(goal).ok_or(PlannerError::InvalidEndpoint)?;
    let start_cell = grid.clamped_cell_of(start);
    let from = nearest_free_cell(grid, start_cell).ok_or(PlannerError::NoPath)?;
    let escaping = from != start_cell;

    let mut raw = a_star(grid, from, goal_cell)?;
    if escaping {
        raw.waypoints.insert(0, *start);
    } else {
        raw.waypoints[0] = *start;
    }
    let last = raw.waypoints.len() - 1;
    if last == 0 {
        raw.waypoints.push(*goal);
    } else {
        raw.waypoints[last] = *goal;
    }
    raw.waypoints.dedup_by(|a, b| (*a - *b).norm() < 1e-9);

    let pruned = if escaping {
        let tail = WaypointPath::from_points(raw.waypoints[1..].to_vec());
        let mut w = vec![*start];
        w.extend(prune_line_of_sight(&tail, grid).waypoints);
        WaypointPath::from_points(w)
    } else {
        let mut p = prune_line_of_sight(&raw, grid);
        p.cost = polyline_length(&p.waypoints);
        p
    };

    let mut knots = subdivide(&pruned.waypoints, params.max_segment);
    let mut traj = fit_timed_spline(&WaypointPath::from_points(knots.clone()), params.v_max, params.a_max)?;
    for _ in 0..12 {
        let bad = colliding_segments(&traj, grid, params.check_step, escaping);
        if bad.is_empty() {
            break;
        }
        // bisect offending spans and their neighbours to pull the spline onto the polyline
        let mut split = vec![false; knots.len() - 1];
        for &i in &bad {
            for j in i.saturating_sub(1)..=(i + 1).min(split.len() - 1) {
                split[j] = true;
            }
        }
        let mut refined = vec![knots[0]];
        for (i, w) in knots.windows(2).enumerate() {
            if split[i] {
                refined.push(0.5 * (w[0] + w[1]));
            }
            refined.push(w[1]);
        }
        knots = refined;
        traj = fit_timed_spline(&WaypointPath::from_points(knots.clone()), params.v_max, params.a_max)?;
    }
    Ok(Plan { raw, knots: WaypointPath::from_points(knots), trajectory: traj })
}

/// Fresh reference from the current payload position to the goal on the updated map.
pub fn replan(grid: &OccupancyGrid, current: &Vec3, goal: &Vec3, params: &PlannerParams) -> Result<SplineTrajectory, PlannerError> {
    plan_path(grid, current, goal, params).map(|p| p.trajectory)
}
