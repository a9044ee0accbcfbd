use super::astar::{polyline_length, WaypointPath};
use crate::world::{Cell, OccupancyGrid};
use crate::Vec3;

const TIE_EPS: f64 = 1e-12;

/// Every cell touched by the segment `a -> b`, including cells grazed where the
/// segment crosses an edge or corner (supercover walk).
pub fn segment_cells(grid: &OccupancyGrid, a: &Vec3, b: &Vec3) -> Vec<Cell> {
    let res = grid.resolution();
    let d = b - a;
    let mut cell: Cell = [0; 3];
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    let mut end: Cell = [0; 3];
    for k in 0..3 {
        cell[k] = (a[k] / res).floor() as i64;
        end[k] = (b[k] / res).floor() as i64;
        if d[k] > 0.0 {
            step[k] = 1;
            t_delta[k] = res / d[k];
            t_max[k] = ((cell[k] + 1) as f64 * res - a[k]) / d[k];
        } else if d[k] < 0.0 {
            step[k] = -1;
            t_delta[k] = -res / d[k];
            t_max[k] = (cell[k] as f64 * res - a[k]) / d[k];
        }
    }
    let mut out = vec![cell];
    let limit = (0..3).map(|k| (end[k] - cell[k]).unsigned_abs()).sum::<u64>() + 1;
    for _ in 0..limit {
        if cell == end {
            break;
        }
        let tm = t_max.iter().copied().fold(f64::INFINITY, f64::min);
        if tm > 1.0 {
            break;
        }
        let tied: Vec<usize> = (0..3).filter(|&k| t_max[k] <= tm + TIE_EPS).collect();
        if tied.len() > 1 {
            // passing through an edge or corner: include the grazed neighbours
            for mask in 1..(1u32 << tied.len()) - 1 {
                let mut c = cell;
                for (bit, &k) in tied.iter().enumerate() {
                    if mask & (1 << bit) != 0 {
                        c[k] += step[k];
                    }
                }
                out.push(c);
            }
        }
        for &k in &tied {
            cell[k] += step[k];
            t_max[k] += t_delta[k];
        }
        out.push(cell);
    }
    out
}

/// True if every cell the segment touches is in bounds and finite cost.
pub fn segment_is_free(grid: &OccupancyGrid, a: &Vec3, b: &Vec3) -> bool {
    segment_cells(grid, a, b).iter().all(|c| grid.is_free(c))
}

/// Greedy line-of-sight shortcutting: from each kept waypoint, jump to the
/// farthest later waypoint that is still visible. Endpoints are kept.
pub fn prune_line_of_sight(path: &WaypointPath, grid: &OccupancyGrid) -> WaypointPath {
    let w = &path.waypoints;
    if w.len() <= 2 {
        return path.clone();
    }
    let mut kept = vec![w[0]];
    let mut i = 0;
    while i < w.len() - 1 {
        let mut j = w.len() - 1;
        while j > i + 1 && !segment_is_free(grid, &w[i], &w[j]) {
            j -= 1;
        }
        kept.push(w[j]);
        i = j;
    }
    let cost = polyline_length(&kept).min(path.cost);
    WaypointPath { waypoints: kept, cost }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{inflate_safety, rasterize_static, Aabb, GridSpec};

    fn spec() -> GridSpec {
        GridSpec { resolution: 1.0, dims: [10, 10, 3] }
    }

    #[test]
    fn collinear_path_keeps_endpoints() {
        let g = OccupancyGrid::empty(spec()).unwrap();
        let p = WaypointPath::from_points((0..8).map(|k| Vec3::new(k as f64 + 0.5, 0.5, 0.5)).collect());
        let q = prune_line_of_sight(&p, &g);
        assert_eq!(q.waypoints, vec![p.waypoints[0], p.waypoints[7]]);
        assert!(q.cost <= p.cost);
    }

    #[test]
    fn corner_around_block_is_kept() {
        let b = Aabb::new(Vec3::new(0.0, 2.0, 0.0), Vec3::new(6.0, 10.0, 3.0)).unwrap();
        let g = inflate_safety(&rasterize_static(&[b], &spec()).unwrap(), 1.0);
        // L-shape: along y = 0.5 to x = 7.5, then up x = 7.5
        let mut pts: Vec<Vec3> = (0..8).map(|k| Vec3::new(k as f64 + 0.5, 0.5, 1.5)).collect();
        pts.extend((1..10).map(|k| Vec3::new(7.5, k as f64 + 0.5, 1.5)));
        let p = WaypointPath::from_points(pts);
        let q = prune_line_of_sight(&p, &g);
        assert!(q.waypoints.len() >= 3);
        assert!(q.waypoints.contains(&Vec3::new(7.5, 0.5, 1.5)) || q.waypoints.len() > 3);
        for w in q.waypoints.windows(2) {
            assert!(segment_is_free(&g, &w[0], &w[1]));
        }
    }

    #[test]
    fn two_point_path_unchanged() {
        let g = OccupancyGrid::empty(spec()).unwrap();
        let p = WaypointPath::from_points(vec![Vec3::new(0.5, 0.5, 0.5), Vec3::new(5.5, 3.5, 1.5)]);
        assert_eq!(prune_line_of_sight(&p, &g), p);
    }

    #[test]
    fn diagonal_through_corner_touches_grazed_cells() {
        let g = OccupancyGrid::empty(spec()).unwrap();
        let cells = segment_cells(&g, &Vec3::new(0.5, 0.5, 0.5), &Vec3::new(2.5, 2.5, 0.5));
        assert!(cells.contains(&[1, 0, 0]) && cells.contains(&[0, 1, 0]));
        assert!(cells.contains(&[2, 2, 0]));
    }
}
