use serde::{Deserialize, Serialize};

use super::kalman::ObstacleTrack;
use crate::world::OccupancyGrid;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TriggerMode {
    /// Re-solve only on events or after `k_max` idle control ticks.
    #[default]
    Event,
    /// Re-solve on every control tick.
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriggerConfig {
    pub mode: TriggerMode,
    /// Payload position error that raises a deviation event [m]
    pub delta_trig: f64,
    /// Conflict look-ahead horizon [s]
    pub t_pred: f64,
    /// Control ticks without a solve before one is forced.
    pub k_max: u32,
    /// Extra corridor width beyond the inflation radius, in cells.
    pub corridor_margin_cells: f64,
    /// Predicted approach distance that counts as a conflict, added to the track radius [m]
    pub conflict_radius: f64,
    pub deviation_enabled: bool,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        Self {
            mode: TriggerMode::Event,
            delta_trig: 0.3,
            t_pred: 5.0,
            k_max: 10,
            corridor_margin_cells: 1.0,
            conflict_radius: 2.0,
            deviation_enabled: true,
        }
    }
}

/// Events raised at one sensing or control instant. Empty means no trigger.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EventSet {
    pub time: f64,
    /// Newly mapped cells that intrude on the planned corridor.
    pub new_static_cells: Vec<usize>,
    /// `(track id, predicted first conflict time)`
    pub conflict_events: Vec<(u32, f64)>,
    pub deviation_event: bool,
}

impl EventSet {
    pub fn empty(time: f64) -> Self {
        Self { time, ..Default::default() }
    }

    pub fn is_empty(&self) -> bool {
        self.new_static_cells.is_empty() && self.conflict_events.is_empty() && !self.deviation_event
    }

    /// True when the event calls for a new global plan.
    pub fn needs_replan(&self) -> bool {
        !self.new_static_cells.is_empty() || !self.conflict_events.is_empty()
    }

    /// Names of the event kinds present, in a fixed order.
    pub fn kinds(&self) -> Vec<&'static str> {
        let mut k = Vec::new();
        if !self.new_static_cells.is_empty() {
            k.push("map");
        }
        if !self.conflict_events.is_empty() {
            k.push("conflict");
        }
        if self.deviation_event {
            k.push("deviation");
        }
        k
    }

    /// Union of two event sets at the later time.
    pub fn merge(&mut self, other: &EventSet) {
        self.time = self.time.max(other.time);
        self.new_static_cells.extend(&other.new_static_cells);
        self.new_static_cells.sort_unstable();
        self.new_static_cells.dedup();
        self.conflict_events.extend(&other.conflict_events);
        self.deviation_event |= other.deviation_event;
    }
}

fn point_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let l2 = ab.norm_squared();
    let s = if l2 > 0.0 { ((p - a).dot(&ab) / l2).clamp(0.0, 1.0) } else { 0.0 };
    (a + ab * s - p).norm()
}

/// First time in `[t0, t1]` at which `|d0 + (d1 - d0) s|` drops to `radius`.
fn first_crossing(d0: &Vec3, d1: &Vec3, t0: f64, t1: f64, radius: f64) -> Option<f64> {
    let c = d0.norm_squared() - radius * radius;
    if c <= 0.0 {
        return Some(t0);
    }
    let delta = d1 - d0;
    let a = delta.norm_squared();
    let b = d0.dot(&delta);
    if a == 0.0 || b >= 0.0 {
        return None;
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let s = (-b - disc.sqrt()) / a;
    (0.0..=1.0).contains(&s).then_some(t0 + s * (t1 - t0))
}

/// Reference samples restricted to `[t, t + horizon]`, padded so the window is covered.
fn window(reference: &[(f64, Vec3)], t: f64, horizon: f64) -> Vec<(f64, Vec3)> {
    let end = t + horizon;
    let interp = |tq: f64| -> Vec3 {
        match reference.iter().position(|(ti, _)| *ti >= tq) {
            None => reference.last().expect("non-empty").1,
            Some(0) => reference[0].1,
            Some(i) => {
                let (ta, pa) = reference[i - 1];
                let (tb, pb) = reference[i];
                if tb > ta {
                    pa + (pb - pa) * ((tq - ta) / (tb - ta))
                } else {
                    pb
                }
            }
        }
    };
    let mut out = vec![(t, interp(t))];
    out.extend(reference.iter().filter(|(ti, _)| *ti > t && *ti < end).copied());
    out.push((end, interp(end)));
    out
}

/// Evaluates the trigger conditions at time `t`.
///
/// `reference` is the remaining planned payload path as `(absolute time, position)`
/// samples and `tracking_error` the current payload position error norm.
pub fn detect_events(
    new_cells: &[usize],
    grid: &OccupancyGrid,
    tracks: &[ObstacleTrack],
    reference: &[(f64, Vec3)],
    config: &TriggerConfig,
    tracking_error: f64,
    t: f64,
) -> EventSet {
    let mut ev = EventSet::empty(t);
    if !reference.is_empty() {
        let corridor = grid.inflation_radius() + config.corridor_margin_cells * grid.resolution();
        for &i in new_cells {
            let c = grid.cell_center(&grid.cell_of_index(i));
            let near = if reference.len() == 1 {
                (c - reference[0].1).norm() <= corridor
            } else {
                reference.windows(2).any(|w| point_segment_distance(&c, &w[0].1, &w[1].1) <= corridor)
            };
            if near {
                ev.new_static_cells.push(i);
            }
        }

        let samples = window(reference, t, config.t_pred);
        for tr in tracks {
            let radius = config.conflict_radius + tr.radius;
            let hit = samples.windows(2).find_map(|w| {
                let (t0, p0) = w[0];
                let (t1, p1) = w[1];
                first_crossing(&(tr.position_at(t0) - p0), &(tr.position_at(t1) - p1), t0, t1, radius)
            });
            if let Some(tc) = hit {
                ev.conflict_events.push((tr.id, tc));
            }
        }
    }
    ev.deviation_event = config.deviation_enabled && tracking_error > config.delta_trig;
    ev
}
