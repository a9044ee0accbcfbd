//! Per-quadrotor cable tracking and attitude control.
//!
//! Each quadrotor holds its cable along the commanded direction with a PD
//! position loop around the point `ℓ` up-cable from its attachment, feeds the
//! desired cable force forward, and tracks the resulting thrust direction with
//! a geometric attitude controller on SO(3).

use serde::{Deserialize, Serialize};

use crate::dynamics::{attachment_point, attachment_velocity, PayloadState, QuadrotorState};
use crate::math::{rotation_log, skew, vee};
use crate::{gravity_vector, Mat3, Vec3};

/// Thrust magnitude below which the desired attitude is undefined [N].
pub const F_MIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControlError {
    #[error("desired force {0} N is too small to define a thrust direction")]
    DegenerateForce(f64),
    #[error("invalid gains: {0}")]
    InvalidGains(String),
}

/// Per-axis gains of the cable tracking and attitude loops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlGains {
    /// [1/s²]
    pub k_p: Vec3,
    /// [1/s]
    pub k_v: Vec3,
    /// [N m/rad]
    pub k_r: Vec3,
    /// [N m s/rad]
    pub k_omega: Vec3,
}

impl Default for ControlGains {
    fn default() -> Self {
        Self {
            k_p: Vec3::repeat(6.0),
            k_v: Vec3::repeat(4.0),
            k_r: Vec3::new(0.9, 0.9, 0.4),
            k_omega: Vec3::new(0.083, 0.083, 0.072),
        }
    }
}

impl ControlGains {
    pub fn validate(&self) -> Result<(), ControlError> {
        for (name, g) in [("k_p", self.k_p), ("k_v", self.k_v), ("k_r", self.k_r), ("k_omega", self.k_omega)] {
            if !g.iter().all(|v| *v > 0.0 && v.is_finite()) {
                return Err(ControlError::InvalidGains(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Desired attitude with its body-frame angular velocity and acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttitudeSetpoint {
    pub r_des: Mat3,
    pub omega_des: Vec3,
    pub omega_dot_des: Vec3,
}

impl Default for AttitudeSetpoint {
    fn default() -> Self {
        Self { r_des: Mat3::identity(), omega_des: Vec3::zeros(), omega_dot_des: Vec3::zeros() }
    }
}

/// Collective thrust and body moments for one quadrotor.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QuadCommand {
    /// [N], non-negative before saturation
    pub f: f64,
    /// [N m]
    pub m: Vec3,
}

/// Translational target of one quadrotor.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CableSetpoint {
    pub p_des: Vec3,
    pub v_des: Vec3,
    pub a_des: Vec3,
    /// Unit cable axis; position feedback along it is dropped since the taut
    /// cable fixes that coordinate and the tension feed-forward owns it.
    /// Zero keeps full three-axis feedback.
    pub axis: Vec3,
}

/// Point `ℓ` up-cable from attachment `r_k`, with its velocity and acceleration
/// when the cable swings at `omega_des` and the attachment accelerates at
/// `attachment_accel`. `xi_des` points from the quadrotor to the attachment.
pub fn cable_setpoint(
    payload: &PayloadState,
    attachment_accel: &Vec3,
    r_k: &Vec3,
    xi_des: &Vec3,
    omega_des: &Vec3,
    cable_length: f64,
) -> CableSetpoint {
    let xi_dot = omega_des.cross(xi_des);
    let xi_ddot = omega_des.cross(&xi_dot);
    CableSetpoint {
        p_des: attachment_point(payload, r_k) - cable_length * xi_des,
        v_des: attachment_velocity(payload, r_k) - cable_length * xi_dot,
        a_des: attachment_accel - cable_length * xi_ddot,
        axis: *xi_des,
    }
}

/// World force the rotors should produce: gravity compensation, PD tracking of
/// `sp` and feed-forward of the desired cable force `mu_k` on the payload,
/// which the cable returns on the quadrotor as `-mu_k`.
pub fn desired_force(
    quad: &QuadrotorState,
    sp: &CableSetpoint,
    gains: &ControlGains,
    mass: f64,
    mu_k: &Vec3,
) -> Vec3 {
    let e_p = sp.p_des - quad.position;
    let e_v = sp.v_des - quad.velocity;
    let fb = gains.k_p.component_mul(&e_p) + gains.k_v.component_mul(&e_v);
    let fb = fb - sp.axis * sp.axis.dot(&fb);
    mass * (sp.a_des - gravity_vector()) + mass * fb + mu_k
}

/// Projection of `u` on the body thrust axis, clamped at zero.
pub fn thrust_command(u: &Vec3, r: &Mat3) -> f64 {
    u.dot(&r.column(2)).max(0.0)
}

/// Attitude whose body z-axis is along `u` and whose heading is closest to
/// `yaw_des`. Rates are zero; [`QuadController`] differentiates successive
/// setpoints.
pub fn attitude_setpoint_from_force(u: &Vec3, yaw_des: f64) -> Result<AttitudeSetpoint, ControlError> {
    let n = u.norm();
    if !(n > F_MIN) {
        return Err(ControlError::DegenerateForce(n));
    }
    let b3 = u / n;
    let heading = Vec3::new(yaw_des.cos(), yaw_des.sin(), 0.0);
    let mut b1 = heading - b3 * heading.dot(&b3);
    if b1.norm() < 1e-6 {
        // thrust along the heading: fall back to the body y-axis of the yaw frame
        let side = Vec3::new(-yaw_des.sin(), yaw_des.cos(), 0.0);
        b1 = side.cross(&b3);
    }
    let b1 = b1.normalize();
    let b2 = b3.cross(&b1);
    Ok(AttitudeSetpoint { r_des: Mat3::from_columns(&[b1, b2, b3]), ..Default::default() })
}

/// Attitude and rate errors `(e_R, e_Ω)` of `(r, omega)` against `sp`.
pub fn attitude_errors(r: &Mat3, omega: &Vec3, sp: &AttitudeSetpoint) -> (Vec3, Vec3) {
    let e_r = 0.5 * vee(&(sp.r_des.transpose() * r - r.transpose() * sp.r_des));
    let e_omega = omega - r.transpose() * sp.r_des * sp.omega_des;
    (e_r, e_omega)
}

/// Geometric attitude law with gyroscopic and feed-forward compensation.
pub fn attitude_control(
    r: &Mat3,
    omega: &Vec3,
    sp: &AttitudeSetpoint,
    inertia: &Mat3,
    gains: &ControlGains,
) -> Vec3 {
    let (e_r, e_omega) = attitude_errors(r, omega, sp);
    let rt_rd = r.transpose() * sp.r_des;
    -gains.k_r.component_mul(&e_r) - gains.k_omega.component_mul(&e_omega)
        + omega.cross(&(inertia * omega))
        - inertia * (skew(omega) * rt_rd * sp.omega_des - rt_rd * sp.omega_dot_des)
}

/// Output of one inner-loop update.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlOutput {
    pub command: QuadCommand,
    pub setpoint: AttitudeSetpoint,
    pub e_r_norm: f64,
}

/// Inner loop of one quadrotor. Desired body rates come from differencing
/// successive desired attitudes and are smoothed by a first-order filter with
/// time constant `rate_filter_tau`, whose output is differenced again for the
/// angular acceleration.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadController {
    pub gains: ControlGains,
    pub mass: f64,
    pub inertia: Mat3,
    pub yaw_des: f64,
    pub rate_filter_tau: f64,
    previous: Option<AttitudeSetpoint>,
}

impl QuadController {
    pub fn new(gains: ControlGains, mass: f64, inertia: Mat3) -> Self {
        Self { gains, mass, inertia, yaw_des: 0.0, rate_filter_tau: 0.02, previous: None }
    }

    pub fn reset(&mut self) {
        self.previous = None;
    }

    /// Thrust and moments tracking `sp` with cable force feed-forward `mu_k`.
    /// A degenerate force direction holds the previous attitude setpoint.
    pub fn update(&mut self, quad: &QuadrotorState, sp: &CableSetpoint, mu_k: &Vec3, dt: f64) -> ControlOutput {
        let u = desired_force(quad, sp, &self.gains, self.mass, mu_k);
        let setpoint = match (attitude_setpoint_from_force(&u, self.yaw_des), self.previous) {
            (Ok(target), Some(prev)) if dt > 0.0 => {
                let raw = rotation_log(&(prev.r_des.transpose() * target.r_des)) / dt;
                let alpha = dt / (self.rate_filter_tau + dt);
                let omega_des = prev.omega_des + alpha * (raw - prev.omega_des);
                let omega_dot_des = (omega_des - prev.omega_des) / dt;
                AttitudeSetpoint { r_des: target.r_des, omega_des, omega_dot_des }
            }
            (Ok(target), _) => target,
            (Err(_), Some(prev)) => AttitudeSetpoint { omega_des: Vec3::zeros(), omega_dot_des: Vec3::zeros(), ..prev },
            (Err(_), None) => AttitudeSetpoint::default(),
        };
        self.previous = Some(setpoint);
        let r = quad.rotation();
        let (e_r, _) = attitude_errors(&r, &quad.body_rates, &setpoint);
        ControlOutput {
            command: QuadCommand {
                f: thrust_command(&u, &r),
                m: attitude_control(&r, &quad.body_rates, &setpoint, &self.inertia, &self.gains),
            },
            setpoint,
            e_r_norm: e_r.norm(),
        }
    }
}
