use serde::{Deserialize, Serialize};

use super::astar::WaypointPath;

/// Rest-to-rest trapezoidal (or triangular) speed profile over a fixed distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapezoidProfile {
    pub length: f64,
    pub a_max: f64,
    /// Peak speed actually reached.
    pub v_peak: f64,
    pub t_acc: f64,
    pub t_cruise: f64,
}

impl TrapezoidProfile {
    pub fn new(length: f64, v_max: f64, a_max: f64) -> Self {
        let length = length.max(0.0);
        if length == 0.0 {
            return Self { length, a_max, v_peak: 0.0, t_acc: 0.0, t_cruise: 0.0 };
        }
        let v_peak = v_max.min((length * a_max).sqrt());
        let t_acc = v_peak / a_max;
        let d_acc = 0.5 * a_max * t_acc * t_acc;
        let t_cruise = ((length - 2.0 * d_acc) / v_peak).max(0.0);
        Self { length, a_max, v_peak, t_acc, t_cruise }
    }

    pub fn duration(&self) -> f64 {
        2.0 * self.t_acc + self.t_cruise
    }

    fn d_acc(&self) -> f64 {
        0.5 * self.a_max * self.t_acc * self.t_acc
    }

    /// Distance, speed and acceleration at time `t` (clamped to the profile).
    pub fn state(&self, t: f64) -> (f64, f64, f64) {
        let total = self.duration();
        if total == 0.0 || t <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        if t >= total {
            return (self.length, 0.0, 0.0);
        }
        let a = self.a_max;
        if t < self.t_acc {
            (0.5 * a * t * t, a * t, a)
        } else if t <= self.t_acc + self.t_cruise {
            (self.d_acc() + self.v_peak * (t - self.t_acc), self.v_peak, 0.0)
        } else {
            let r = total - t;
            (self.length - 0.5 * a * r * r, a * r, -a)
        }
    }

    /// Time at which distance `s` is reached.
    pub fn time_at(&self, s: f64) -> f64 {
        if self.length == 0.0 || s <= 0.0 {
            return 0.0;
        }
        if s >= self.length {
            return self.duration();
        }
        let d_acc = self.d_acc();
        if s < d_acc {
            (2.0 * s / self.a_max).sqrt()
        } else if s <= self.length - d_acc {
            self.t_acc + (s - d_acc) / self.v_peak
        } else {
            self.duration() - (2.0 * (self.length - s) / self.a_max).sqrt()
        }
    }
}

/// Cumulative arc length at each waypoint.
pub fn arc_lengths(path: &WaypointPath) -> Vec<f64> {
    let mut s = vec![0.0];
    for w in path.waypoints.windows(2) {
        let last = *s.last().expect("non-empty");
        s.push(last + (w[1] - w[0]).norm());
    }
    s.truncate(path.waypoints.len().max(1));
    s
}

/// Knot times from a trapezoidal speed profile along the path's arc length.
pub fn time_allocate(path: &WaypointPath, v_max: f64, a_max: f64) -> Vec<f64> {
    let s = arc_lengths(path);
    let prof = TrapezoidProfile::new(*s.last().unwrap_or(&0.0), v_max, a_max);
    s.iter().map(|&si| prof.time_at(si)).collect()
}
