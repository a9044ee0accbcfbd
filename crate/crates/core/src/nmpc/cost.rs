use nalgebra::{Matrix6, SMatrix, Vector6};
use serde::{Deserialize, Serialize};

use super::model::{NmpcStateX, PayloadModel, Vec12, WrenchU};
use crate::math::quaternion_log;
use crate::planner::DesiredState;
use crate::Vec3;

pub type Mat12 = SMatrix<f64, 12, 12>;

/// Box bounds on the payload wrench.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrenchBounds {
    pub lower: Vector6<f64>,
    pub upper: Vector6<f64>,
}

impl WrenchBounds {
    pub fn unbounded() -> Self {
        Self { lower: Vector6::repeat(f64::NEG_INFINITY), upper: Vector6::repeat(f64::INFINITY) }
    }

    pub fn project(&self, u: &Vector6<f64>) -> Vector6<f64> {
        u.zip_zip_map(&self.lower, &self.upper, |v, lo, hi| v.max(lo).min(hi))
    }

    pub fn contains(&self, u: &Vector6<f64>) -> bool {
        (0..6).all(|k| u[k] >= self.lower[k] && u[k] <= self.upper[k])
    }
}

/// Solver settings and weights. Weight matrices act on the error vector
/// `[e_p, e_v, e_att, e_ω]` of [`state_error`].
#[derive(Debug, Clone, PartialEq)]
pub struct NmpcParams {
    pub horizon: usize,
    pub dt_c: f64,
    pub q_x: Mat12,
    pub q_xn: Mat12,
    pub q_u: Matrix6<f64>,
    pub bounds: WrenchBounds,
    pub max_iters: usize,
    pub cost_tol: f64,
    pub step_tol: f64,
}

/// Scenario-level NMPC settings, expanded into [`NmpcParams`] once the payload mass is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmpcConfig {
    pub horizon: usize,
    pub dt_c: f64,
    pub q_position: f64,
    pub q_velocity: f64,
    pub q_attitude: f64,
    pub q_rates: f64,
    /// Terminal weight as a multiple of the stage weight.
    pub terminal_scale: f64,
    pub q_input: f64,
    /// Horizontal force limit [N]
    pub force_xy_max: f64,
    /// Vertical force window around hover, as accelerations below / above g [m/s²]
    pub accel_down: f64,
    pub accel_up: f64,
    /// Moment limit per axis [N m]
    pub moment_max: f64,
    pub max_iters: usize,
    pub cost_tol: f64,
    pub step_tol: f64,
}

impl Default for NmpcConfig {
    fn default() -> Self {
        Self {
            horizon: 20,
            dt_c: 0.1,
            q_position: 10.0,
            q_velocity: 1.0,
            q_attitude: 5.0,
            q_rates: 1.0,
            terminal_scale: 5.0,
            q_input: 0.01,
            force_xy_max: 0.7,
            accel_down: 3.0,
            accel_up: 2.0,
            moment_max: 0.05,
            max_iters: 50,
            cost_tol: 1e-8,
            step_tol: 1e-9,
        }
    }
}

impl NmpcConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.horizon < 1 {
            return Err("horizon must be at least 1".into());
        }
        if !(self.dt_c > 0.0) {
            return Err("dt_c must be positive".into());
        }
        let w = [self.q_position, self.q_velocity, self.q_attitude, self.q_rates, self.terminal_scale, self.q_input];
        if w.iter().any(|v| !(*v >= 0.0)) {
            return Err("weights must be non-negative".into());
        }
        if !(self.force_xy_max >= 0.0 && self.accel_down >= 0.0 && self.accel_up >= 0.0 && self.moment_max >= 0.0) {
            return Err("wrench limits must be non-negative".into());
        }
        Ok(())
    }

    pub fn params(&self, model: &PayloadModel) -> NmpcParams {
        let mut d = Vec12::zeros();
        for k in 0..3 {
            d[k] = self.q_position;
            d[3 + k] = self.q_velocity;
            d[6 + k] = self.q_attitude;
            d[9 + k] = self.q_rates;
        }
        let q_x = Mat12::from_diagonal(&d);
        let hover = model.hover_wrench().force;
        let g = model.gravity.norm();
        let f = self.force_xy_max;
        let mz = self.moment_max;
        let bounds = WrenchBounds {
            lower: Vector6::new(hover.x - f, hover.y - f, model.mass * (g - self.accel_down), -mz, -mz, -mz),
            upper: Vector6::new(hover.x + f, hover.y + f, model.mass * (g + self.accel_up), mz, mz, mz),
        };
        NmpcParams {
            horizon: self.horizon,
            dt_c: self.dt_c,
            q_x,
            q_xn: q_x * self.terminal_scale,
            q_u: Matrix6::identity() * self.q_input,
            bounds,
            max_iters: self.max_iters,
            cost_tol: self.cost_tol,
            step_tol: self.step_tol,
        }
    }
}

/// Tracking error `[p_des - p, v_des - v, log(q ⊗ q_des⁻¹), ω_des - ω]`.
pub fn state_error(x: &NmpcStateX, des: &DesiredState) -> Vec12 {
    let q = x.att.quaternion();
    let qd = des.attitude.quaternion();
    let e_att = quaternion_log(&(q * qd.inverse()));
    let mut e = Vec12::zeros();
    e.fixed_rows_mut::<3>(0).copy_from(&(des.p_d - x.p));
    e.fixed_rows_mut::<3>(3).copy_from(&(des.v_d - x.v));
    e.fixed_rows_mut::<3>(6).copy_from(&e_att);
    e.fixed_rows_mut::<3>(9).copy_from(&(des.omega_d - x.omega));
    e
}

/// Quadratic tracking cost over the horizon with terminal weight on `X_N`.
pub fn nmpc_cost(
    x_seq: &[NmpcStateX],
    u_seq: &[WrenchU],
    reference: &[DesiredState],
    u_des: &WrenchU,
    params: &NmpcParams,
) -> f64 {
    let n = u_seq.len();
    debug_assert_eq!(x_seq.len(), n + 1);
    let mut cost = 0.0;
    for i in 0..n {
        let e = state_error(&x_seq[i], &reference[i]);
        let eu = u_des.to_vector() - u_seq[i].to_vector();
        cost += e.dot(&(params.q_x * e)) + eu.dot(&(params.q_u * eu));
    }
    let e = state_error(&x_seq[n], &reference[n]);
    cost + e.dot(&(params.q_xn * e))
}

/// Desired state corresponding to the actual state `x` (zero error).
pub fn as_reference(x: &NmpcStateX) -> DesiredState {
    DesiredState { p_d: x.p, v_d: x.v, a_d: Vec3::zeros(), attitude: x.att, omega_d: x.omega }
}
