//! Equations of motion for N quadrotors carrying a rigid payload on
//! tension-only cables.
//!
//! Each cable is a unilateral spring-damper between a quadrotor's center of
//! mass and its attachment point on the payload. A taut cable pulls the
//! quadrotor toward the attachment and the payload toward the quadrotor with
//! equal and opposite forces.

use serde::{Deserialize, Serialize};

use crate::math::{euler_rate_transform, rotation_matrix, EulerAngles, GimbalDomainError};
use crate::{gravity_vector, Mat3, Vec3};

/// Minimum quadrotor-to-attachment distance before a cable is considered degenerate [m].
pub const DEGENERATE_CABLE_DISTANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum DynamicsError {
    #[error(transparent)]
    GimbalDomain(#[from] GimbalDomainError),
    #[error("cable {cable}: quadrotor coincides with its attachment point")]
    Degenerate { cable: usize },
    #[error("state became non-finite at t = {time}")]
    NonFinite { time: f64 },
    #[error("expected {expected} quadrotor inputs, got {got}")]
    InputCount { expected: usize, got: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadrotorParams {
    /// [kg]
    pub mass: f64,
    /// [kg m²], symmetric positive definite
    pub inertia: Mat3,
    /// Collective thrust limit [N]
    pub f_max: f64,
    /// Per-axis torque limit [N m]
    pub tau_max: f64,
}

impl QuadrotorParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.mass > 0.0) {
            return Err(DynamicsError::InvalidParams("quadrotor mass must be positive".into()));
        }
        if !(self.f_max > 0.0) || !(self.tau_max > 0.0) {
            return Err(DynamicsError::InvalidParams("actuator limits must be positive".into()));
        }
        check_inertia(&self.inertia, "quadrotor")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PayloadParams {
    /// [kg]
    pub mass: f64,
    /// [kg m²], symmetric positive definite
    pub inertia: Mat3,
    /// Cable attachment points in the payload body frame [m], one per quadrotor.
    pub attachments: Vec<Vec3>,
    /// Rest length [m]
    pub cable_length: f64,
    /// [N/m]
    pub cable_stiffness: f64,
    /// [N s/m]
    pub cable_damping: f64,
}

impl PayloadParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.mass > 0.0) {
            return Err(DynamicsError::InvalidParams("payload mass must be positive".into()));
        }
        if self.attachments.len() < 3 {
            return Err(DynamicsError::InvalidParams(format!(
                "at least 3 cable attachments required, got {}",
                self.attachments.len()
            )));
        }
        if !(self.cable_length > 0.0) {
            return Err(DynamicsError::InvalidParams("cable length must be positive".into()));
        }
        if !(self.cable_stiffness >= 0.0) || !(self.cable_damping >= 0.0) {
            return Err(DynamicsError::InvalidParams(
                "cable stiffness and damping must be non-negative".into(),
            ));
        }
        check_inertia(&self.inertia, "payload")
    }
}

fn check_inertia(j: &Mat3, what: &str) -> Result<(), DynamicsError> {
    if (j - j.transpose()).abs().max() > 1e-12 * j.abs().max().max(1.0) {
        return Err(DynamicsError::InvalidParams(format!("{what} inertia is not symmetric")));
    }
    if j.cholesky().is_none() {
        return Err(DynamicsError::InvalidParams(format!(
            "{what} inertia is not positive definite"
        )));
    }
    Ok(())
}

/// Position, velocity, attitude and body rates of one rigid body.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: EulerAngles,
    pub body_rates: Vec3,
}

pub type QuadrotorState = BodyState;
pub type PayloadState = BodyState;

impl BodyState {
    pub fn at_rest(position: Vec3) -> Self {
        Self { position, ..Default::default() }
    }

    pub fn rotation(&self) -> Mat3 {
        rotation_matrix(&self.attitude)
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.attitude.is_finite()
            && self.body_rates.iter().all(|v| v.is_finite())
    }

    fn advanced(&self, d: &BodyRates, h: f64) -> Self {
        Self {
            position: self.position + d.position * h,
            velocity: self.velocity + d.velocity * h,
            attitude: EulerAngles::from_vector(&(self.attitude.to_vector() + d.attitude * h)),
            body_rates: self.body_rates + d.body_rates * h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CableState {
    /// [N], zero when slack
    pub tension: f64,
    /// Unit vector from the quadrotor toward its attachment, in the payload body frame.
    pub direction_body: Vec3,
    pub taut: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuadInput {
    /// Commanded collective thrust before saturation [N]
    pub thrust: f64,
    /// Body torque [N m]
    pub torque: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub time: f64,
    pub payload: PayloadState,
    pub quads: Vec<QuadrotorState>,
    /// Cached cable states consistent with the poses above.
    pub cables: Vec<CableState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub quads: Vec<QuadrotorParams>,
    pub payload: PayloadParams,
    pub gravity: Vec3,
}

impl SystemParams {
    pub fn new(quads: Vec<QuadrotorParams>, payload: PayloadParams) -> Self {
        Self { quads, payload, gravity: gravity_vector() }
    }
}

/// Time derivative of one [`BodyState`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BodyRates {
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: Vec3,
    pub body_rates: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemDerivative {
    pub payload: BodyRates,
    pub quads: Vec<BodyRates>,
}

/// Rotor thrust saturation. Thrust is capped at `f_max`, and negative commands
/// clamp to zero since rotors cannot pull.
pub fn saturate_thrust(f: f64, f_max: f64) -> f64 {
    if f >= f_max {
        f_max
    } else {
        f.max(0.0)
    }
}

/// World position of attachment `r_body` on the payload.
pub fn attachment_point(payload: &PayloadState, r_body: &Vec3) -> Vec3 {
    payload.position + payload.rotation() * r_body
}

/// World velocity of attachment `r_body` on the payload.
pub fn attachment_velocity(payload: &PayloadState, r_body: &Vec3) -> Vec3 {
    payload.velocity + payload.rotation() * payload.body_rates.cross(r_body)
}

/// World acceleration of attachment `r_body` when the payload centre
/// accelerates at `accel` and the body angular acceleration is `alpha`.
pub fn attachment_acceleration(payload: &PayloadState, accel: &Vec3, alpha: &Vec3, r_body: &Vec3) -> Vec3 {
    let w = &payload.body_rates;
    accel + payload.rotation() * (alpha.cross(r_body) + w.cross(&w.cross(r_body)))
}

/// Tension and direction of the cable linking `quad` to attachment `r_i`.
pub fn cable_forces(
    quad: &QuadrotorState,
    payload: &PayloadState,
    r_i: &Vec3,
    params: &PayloadParams,
) -> Result<CableState, DynamicsError> {
    let rl = payload.rotation();
    let d = payload.position + rl * r_i - quad.position;
    let len = d.norm();
    if !(len >= DEGENERATE_CABLE_DISTANCE) {
        return Err(DynamicsError::Degenerate { cable: 0 });
    }
    let unit = d / len;
    let direction_body = rl.transpose() * unit;
    if len < params.cable_length {
        return Ok(CableState { tension: 0.0, direction_body, taut: false });
    }
    let v_att = payload.velocity + rl * payload.body_rates.cross(r_i);
    let stretch_rate = unit.dot(&(v_att - quad.velocity));
    let tension = (params.cable_stiffness * (len - params.cable_length)
        + params.cable_damping * stretch_rate)
        .max(0.0);
    Ok(CableState { tension, direction_body, taut: true })
}

/// All cable states for `payload` and `quads`.
pub fn cable_states(
    payload: &PayloadState,
    quads: &[QuadrotorState],
    params: &PayloadParams,
) -> Result<Vec<CableState>, DynamicsError> {
    quads
        .iter()
        .zip(&params.attachments)
        .enumerate()
        .map(|(i, (q, r))| {
            cable_forces(q, payload, r, params).map_err(|e| match e {
                DynamicsError::Degenerate { .. } => DynamicsError::Degenerate { cable: i },
                other => other,
            })
        })
        .collect()
}

impl SystemState {
    /// Builds a state and fills in the cached cable states.
    pub fn new(
        time: f64,
        payload: PayloadState,
        quads: Vec<QuadrotorState>,
        params: &SystemParams,
    ) -> Result<Self, DynamicsError> {
        let cables = cable_states(&payload, &quads, &params.payload)?;
        Ok(Self { time, payload, quads, cables })
    }

    pub fn is_finite(&self) -> bool {
        self.time.is_finite() && self.payload.is_finite() && self.quads.iter().all(|q| q.is_finite())
    }

    /// World-frame force the cable applies to quadrotor `i`; the payload feels the negation.
    pub fn cable_force_on_quad(&self, i: usize) -> Vec3 {
        let c = &self.cables[i];
        self.payload.rotation() * c.direction_body * c.tension
    }

    fn advanced(&self, d: &SystemDerivative, h: f64) -> Self {
        Self {
            time: self.time + h,
            payload: self.payload.advanced(&d.payload, h),
            quads: self.quads.iter().zip(&d.quads).map(|(q, dq)| q.advanced(dq, h)).collect(),
            cables: Vec::new(),
        }
    }
}

fn rotational_rates(
    body: &BodyState,
    inertia: &Mat3,
    torque: &Vec3,
) -> Result<(Vec3, Vec3), DynamicsError> {
    let gamma = euler_rate_transform(&body.attitude)?;
    let w = body.body_rates;
    let jw = inertia * w;
    let rhs = torque - w.cross(&jw);
    let wdot = inertia
        .cholesky()
        .ok_or_else(|| DynamicsError::InvalidParams("inertia not positive definite".into()))?
        .solve(&rhs);
    Ok((gamma * w, wdot))
}

/// Time derivative of the full system under `inputs` (one per quadrotor).
pub fn system_derivative(
    state: &SystemState,
    inputs: &[QuadInput],
    params: &SystemParams,
) -> Result<SystemDerivative, DynamicsError> {
    let n = state.quads.len();
    if inputs.len() != n || params.quads.len() != n || params.payload.attachments.len() < n {
        return Err(DynamicsError::InputCount { expected: n, got: inputs.len() });
    }
    let payload = &state.payload;
    let rl = payload.rotation();
    let mut load_force = Vec3::zeros();
    let mut load_torque = Vec3::zeros();
    let mut quad_rates = Vec::with_capacity(n);

    for (i, ((quad, input), qp)) in state.quads.iter().zip(inputs).zip(&params.quads).enumerate() {
        let r_i = &params.payload.attachments[i];
        let cable = cable_forces(quad, payload, r_i, &params.payload).map_err(|e| match e {
            DynamicsError::Degenerate { .. } => DynamicsError::Degenerate { cable: i },
            other => other,
        })?;
        // tension along e_i (quad -> attachment) acts on the quad; the reaction acts on the load
        let pull_body = cable.direction_body * cable.tension;
        let pull_world = rl * pull_body;
        load_force -= pull_world;
        load_torque += r_i.cross(&(-pull_body));

        let thrust = saturate_thrust(input.thrust, qp.f_max);
        let accel = quad.rotation() * Vec3::z() * (thrust / qp.mass) + params.gravity + pull_world / qp.mass;
        let torque = input.torque.map(|t| t.clamp(-qp.tau_max, qp.tau_max));
        let (att_rate, wdot) = rotational_rates(quad, &qp.inertia, &torque)?;
        quad_rates.push(BodyRates {
            position: quad.velocity,
            velocity: accel,
            attitude: att_rate,
            body_rates: wdot,
        });
    }

    let (att_rate, wdot) = rotational_rates(payload, &params.payload.inertia, &load_torque)?;
    Ok(SystemDerivative {
        payload: BodyRates {
            position: payload.velocity,
            velocity: params.gravity + load_force / params.payload.mass,
            attitude: att_rate,
            body_rates: wdot,
        },
        quads: quad_rates,
    })
}

fn combine(k: [&SystemDerivative; 4]) -> SystemDerivative {
    let mix = |a: &BodyRates, b: &BodyRates, c: &BodyRates, d: &BodyRates| BodyRates {
        position: (a.position + 2.0 * b.position + 2.0 * c.position + d.position) / 6.0,
        velocity: (a.velocity + 2.0 * b.velocity + 2.0 * c.velocity + d.velocity) / 6.0,
        attitude: (a.attitude + 2.0 * b.attitude + 2.0 * c.attitude + d.attitude) / 6.0,
        body_rates: (a.body_rates + 2.0 * b.body_rates + 2.0 * c.body_rates + d.body_rates) / 6.0,
    };
    SystemDerivative {
        payload: mix(&k[0].payload, &k[1].payload, &k[2].payload, &k[3].payload),
        quads: (0..k[0].quads.len())
            .map(|i| mix(&k[0].quads[i], &k[1].quads[i], &k[2].quads[i], &k[3].quads[i]))
            .collect(),
    }
}

/// One classical Runge-Kutta step of length `dt`; inputs are held constant over the step.
pub fn integrate_rk4(
    state: &SystemState,
    inputs: &[QuadInput],
    params: &SystemParams,
    dt: f64,
) -> Result<SystemState, DynamicsError> {
    if !(dt >= 0.0) {
        return Err(DynamicsError::InvalidParams(format!("negative time step {dt}")));
    }
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let k1 = system_derivative(state, inputs, params)?;
    let k2 = system_derivative(&state.advanced(&k1, 0.5 * dt), inputs, params)?;
    let k3 = system_derivative(&state.advanced(&k2, 0.5 * dt), inputs, params)?;
    let k4 = system_derivative(&state.advanced(&k3, dt), inputs, params)?;
    let mut next = state.advanced(&combine([&k1, &k2, &k3, &k4]), dt);
    next.time = state.time + dt;
    if !next.is_finite() {
        return Err(DynamicsError::NonFinite { time: next.time });
    }
    next.cables = cable_states(&next.payload, &next.quads, &params.payload)?;
    Ok(next)
}

/// Rotational kinetic energy `0.5 w^T J w`.
pub fn rotational_energy(body: &BodyState, inertia: &Mat3) -> f64 {
    0.5 * body.body_rates.dot(&(inertia * body.body_rates))
}

/// World-frame angular momentum about the body's center of mass, `R J w`.
pub fn angular_momentum_world(body: &BodyState, inertia: &Mat3) -> Vec3 {
    body.rotation() * (inertia * body.body_rates)
}
