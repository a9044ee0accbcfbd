use serde::{Deserialize, Serialize};

use super::astar::WaypointPath;
use super::timing::{arc_lengths, TrapezoidProfile};
use super::PlannerError;
use crate::math::EulerAngles;
use crate::Vec3;

/// Desired payload state at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DesiredState {
    pub p_d: Vec3,
    pub v_d: Vec3,
    pub a_d: Vec3,
    pub attitude: EulerAngles,
    pub omega_d: Vec3,
}

impl DesiredState {
    /// Level, motionless reference at `p`.
    pub fn hold(p: Vec3) -> Self {
        Self { p_d: p, ..Default::default() }
    }
}

/// How trajectory time maps onto the spline parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimeLaw {
    /// The spline parameter is time itself.
    Identity,
    /// The spline parameter is arc length, advanced by a trapezoidal speed profile.
    Trapezoid(TrapezoidProfile),
}

/// Natural cubic spline through waypoints, evaluated in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineTrajectory {
    /// Time at which each waypoint is reached [s].
    pub knot_times: Vec<f64>,
    /// Spline parameter at each knot.
    knot_params: Vec<f64>,
    /// Per-segment coefficients `[a, b, c, d]` of `a + b h + c h² + d h³`.
    coeffs: Vec<[Vec3; 4]>,
    law: TimeLaw,
}

/// Second derivatives of the natural cubic spline through `(u_i, y_i)`.
fn natural_second_derivatives(u: &[f64], y: &[Vec3]) -> Vec<Vec3> {
    let n = u.len();
    let mut m = vec![Vec3::zeros(); n];
    if n < 3 {
        return m;
    }
    // Thomas algorithm on interior unknowns 1..n-1
    let h: Vec<f64> = u.windows(2).map(|w| w[1] - w[0]).collect();
    let k = n - 2;
    let mut diag = vec![0.0; k];
    let mut upper = vec![0.0; k];
    let mut rhs = vec![Vec3::zeros(); k];
    for i in 1..n - 1 {
        diag[i - 1] = 2.0 * (h[i - 1] + h[i]);
        upper[i - 1] = h[i];
        rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
    }
    for i in 1..k {
        let lower = h[i];
        let w = lower / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        let prev = rhs[i - 1];
        rhs[i] -= w * prev;
    }
    let mut x = vec![Vec3::zeros(); k];
    x[k - 1] = rhs[k - 1] / diag[k - 1];
    for i in (0..k - 1).rev() {
        x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
    }
    m[1..n - 1].copy_from_slice(&x);
    m
}

fn build(u: &[f64], y: &[Vec3]) -> Vec<[Vec3; 4]> {
    let m = natural_second_derivatives(u, y);
    u.windows(2)
        .enumerate()
        .map(|(i, w)| {
            let h = w[1] - w[0];
            let b = (y[i + 1] - y[i]) / h - h * (2.0 * m[i] + m[i + 1]) / 6.0;
            [y[i], b, m[i] / 2.0, (m[i + 1] - m[i]) / (6.0 * h)]
        })
        .collect()
}

/// Natural cubic spline in time through `waypoints` at `knot_times`.
pub fn fit_cubic_spline(waypoints: &[Vec3], knot_times: &[f64]) -> Result<SplineTrajectory, PlannerError> {
    if waypoints.len() < 2 || waypoints.len() != knot_times.len() {
        return Err(PlannerError::TooFewWaypoints);
    }
    if knot_times.windows(2).any(|w| !(w[1] > w[0])) || !knot_times.iter().all(|t| t.is_finite()) {
        return Err(PlannerError::DegenerateKnots);
    }
    Ok(SplineTrajectory {
        knot_times: knot_times.to_vec(),
        knot_params: knot_times.to_vec(),
        coeffs: build(knot_times, waypoints),
        law: TimeLaw::Identity,
    })
}

/// Natural cubic spline in arc length through the path, timed by a rest-to-rest
/// trapezoidal profile. Knot times equal [`super::time_allocate`] of the path.
pub fn fit_timed_spline(path: &WaypointPath, v_max: f64, a_max: f64) -> Result<SplineTrajectory, PlannerError> {
    let w = &path.waypoints;
    if w.is_empty() {
        return Err(PlannerError::TooFewWaypoints);
    }
    let s = arc_lengths(path);
    let prof = TrapezoidProfile::new(*s.last().expect("non-empty"), v_max, a_max);
    if w.len() == 1 || prof.length == 0.0 {
        return Ok(SplineTrajectory {
            knot_times: vec![0.0],
            knot_params: vec![0.0],
            coeffs: vec![[w[0], Vec3::zeros(), Vec3::zeros(), Vec3::zeros()]],
            law: TimeLaw::Trapezoid(prof),
        });
    }
    if s.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(PlannerError::DegenerateKnots);
    }
    Ok(SplineTrajectory {
        knot_times: s.iter().map(|&si| prof.time_at(si)).collect(),
        knot_params: s.clone(),
        coeffs: build(&s, w),
        law: TimeLaw::Trapezoid(prof),
    })
}

impl SplineTrajectory {
    pub fn duration(&self) -> f64 {
        match self.law {
            TimeLaw::Identity => *self.knot_times.last().expect("non-empty"),
            TimeLaw::Trapezoid(p) => p.duration(),
        }
    }

    pub fn start_time(&self) -> f64 {
        match self.law {
            TimeLaw::Identity => self.knot_times[0],
            TimeLaw::Trapezoid(_) => 0.0,
        }
    }

    pub fn time_law(&self) -> &TimeLaw {
        &self.law
    }

    pub fn num_segments(&self) -> usize {
        self.coeffs.len()
    }

    pub fn waypoints(&self) -> Vec<Vec3> {
        let mut w: Vec<Vec3> = self.coeffs.iter().map(|c| c[0]).collect();
        if self.knot_params.len() > 1 {
            w.push(self.eval_param(*self.knot_params.last().expect("non-empty")).0);
        }
        w
    }

    fn segment(&self, u: f64) -> usize {
        let n = self.coeffs.len();
        if n <= 1 {
            return 0;
        }
        // last knot index with knot <= u
        match self.knot_params[1..n].binary_search_by(|k| k.total_cmp(&u)) {
            Ok(i) => i + 1,
            Err(i) => i,
        }
    }

    /// Value, first and second derivative of segment `i` at parameter `u`.
    pub fn eval_segment(&self, i: usize, u: f64) -> (Vec3, Vec3, Vec3) {
        let [a, b, c, d] = self.coeffs[i];
        if self.knot_params.len() == 1 {
            return (a, Vec3::zeros(), Vec3::zeros());
        }
        let h = u - self.knot_params[i];
        (
            a + h * (b + h * (c + h * d)),
            b + h * (2.0 * c + 3.0 * h * d),
            2.0 * c + 6.0 * h * d,
        )
    }

    /// Value and derivatives with respect to the spline parameter.
    pub fn eval_param(&self, u: f64) -> (Vec3, Vec3, Vec3) {
        let lo = self.knot_params[0];
        let hi = *self.knot_params.last().expect("non-empty");
        let u = u.clamp(lo, hi);
        self.eval_segment(self.segment(u), u)
    }

    /// Spline parameter at each knot.
    pub fn knot_params(&self) -> &[f64] {
        &self.knot_params
    }

    /// Position, velocity and acceleration at time `t`. Outside the trajectory's
    /// time span the end point is held with zero derivatives.
    pub fn evaluate(&self, t: f64) -> (Vec3, Vec3, Vec3) {
        let t0 = self.start_time();
        let t1 = self.duration();
        match self.law {
            TimeLaw::Identity => {
                if t <= t0 || t >= t1 {
                    let p = self.eval_param(t.clamp(t0, t1)).0;
                    return (p, Vec3::zeros(), Vec3::zeros());
                }
                self.eval_param(t)
            }
            TimeLaw::Trapezoid(prof) => {
                let (s, sd, sdd) = prof.state(t);
                let (p, dp, ddp) = self.eval_param(s);
                (p, dp * sd, ddp * sd * sd + dp * sdd)
            }
        }
    }

    pub fn position(&self, t: f64) -> Vec3 {
        self.evaluate(t).0
    }
}

/// Desired payload state at time `t` (level attitude, zero angular velocity).
pub fn sample_reference(traj: &SplineTrajectory, t: f64) -> DesiredState {
    let (p_d, v_d, a_d) = traj.evaluate(t);
    DesiredState { p_d, v_d, a_d, attitude: EulerAngles::zero(), omega_d: Vec3::zeros() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_waypoints_interpolate() {
        let w = [Vec3::new(0.0, 1.0, 2.0), Vec3::new(3.0, 1.0, -1.0)];
        let s = fit_cubic_spline(&w, &[0.0, 2.0]).unwrap();
        assert_eq!(s.evaluate(0.0).0, w[0]);
        assert_relative_eq!(s.evaluate(2.0).0, w[1], epsilon = 1e-12);
    }

    #[test]
    fn collinear_uniform_knots_is_a_line() {
        let w = [Vec3::zeros(), Vec3::new(1.0, 2.0, 0.0), Vec3::new(2.0, 4.0, 0.0)];
        let s = fit_cubic_spline(&w, &[0.0, 1.0, 2.0]).unwrap();
        for k in 1..20 {
            let (p, v, a) = s.evaluate(k as f64 / 10.0);
            assert_relative_eq!(p, Vec3::new(1.0, 2.0, 0.0) * (k as f64 / 10.0), epsilon = 1e-12);
            assert_relative_eq!(v, Vec3::new(1.0, 2.0, 0.0), epsilon = 1e-12);
            assert_relative_eq!(a, Vec3::zeros(), epsilon = 1e-12);
        }
    }

    #[test]
    fn knots_are_interpolated() {
        let w: Vec<Vec3> = (0..6).map(|k| Vec3::new(k as f64, (k * k) as f64 * 0.3, (k as f64).sin())).collect();
        let t = [0.0, 0.7, 1.5, 2.0, 3.1, 4.0];
        let s = fit_cubic_spline(&w, &t).unwrap();
        for (wi, ti) in w.iter().zip(t) {
            assert_relative_eq!(s.evaluate(ti).0, *wi, epsilon = 1e-9);
        }
    }

    #[test]
    fn bad_knots_rejected() {
        let w = [Vec3::zeros(), Vec3::repeat(1.0), Vec3::repeat(2.0)];
        assert_eq!(fit_cubic_spline(&w, &[0.0, 1.0, 1.0]), Err(PlannerError::DegenerateKnots));
        assert_eq!(fit_cubic_spline(&w[..1], &[0.0]), Err(PlannerError::TooFewWaypoints));
    }

    #[test]
    fn timed_spline_starts_and_ends_at_rest() {
        let path = WaypointPath::from_points(vec![
            Vec3::zeros(),
            Vec3::new(4.0, 0.0, 0.0),
            Vec3::new(4.0, 5.0, 1.0),
        ]);
        let s = fit_timed_spline(&path, 2.0, 1.0).unwrap();
        let start = sample_reference(&s, 0.0);
        assert_eq!(start.p_d, Vec3::zeros());
        assert_eq!(start.v_d, Vec3::zeros());
        let end = sample_reference(&s, s.duration() + 3.0);
        assert_relative_eq!(end.p_d, path.waypoints[2], epsilon = 1e-12);
        assert_eq!(end.v_d, Vec3::zeros());
        assert_eq!(end.a_d, Vec3::zeros());
        let kt = super::super::time_allocate(&path, 2.0, 1.0);
        assert_eq!(s.knot_times, kt);
        for (w, t) in path.waypoints.iter().zip(&kt) {
            assert_relative_eq!(s.position(*t), *w, epsilon = 1e-9);
        }
    }

    #[test]
    fn single_point_trajectory_holds() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        let s = fit_timed_spline(&WaypointPath::from_points(vec![p]), 2.0, 1.0).unwrap();
        assert_eq!(s.duration(), 0.0);
        assert_eq!(sample_reference(&s, 5.0), DesiredState::hold(p));
    }
}
