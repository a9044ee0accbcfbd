use nalgebra::{SVector, Vector6};
use serde::{Deserialize, Serialize};

use crate::dynamics::PayloadState;
use crate::math::{euler_rate_transform, EulerAngles, GimbalDomainError};
use crate::{Mat3, Vec3};

pub type Vec12 = SVector<f64, 12>;

/// Payload state `[p, Θ, v, ω]` used for prediction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NmpcStateX {
    pub p: Vec3,
    pub att: EulerAngles,
    pub v: Vec3,
    pub omega: Vec3,
}

impl NmpcStateX {
    pub fn to_vector(&self) -> Vec12 {
        let mut x = Vec12::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&self.p);
        x.fixed_rows_mut::<3>(3).copy_from(&self.att.to_vector());
        x.fixed_rows_mut::<3>(6).copy_from(&self.v);
        x.fixed_rows_mut::<3>(9).copy_from(&self.omega);
        x
    }

    pub fn from_vector(x: &Vec12) -> Self {
        Self {
            p: x.fixed_rows::<3>(0).into_owned(),
            att: EulerAngles::from_vector(&x.fixed_rows::<3>(3).into_owned()),
            v: x.fixed_rows::<3>(6).into_owned(),
            omega: x.fixed_rows::<3>(9).into_owned(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

impl From<&PayloadState> for NmpcStateX {
    fn from(s: &PayloadState) -> Self {
        Self { p: s.position, att: s.attitude, v: s.velocity, omega: s.body_rates }
    }
}

/// Payload wrench: world-frame force and body-frame moment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WrenchU {
    pub force: Vec3,
    pub moment: Vec3,
}

impl WrenchU {
    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.force.x, self.force.y, self.force.z, self.moment.x, self.moment.y, self.moment.z)
    }

    pub fn from_vector(u: &Vector6<f64>) -> Self {
        Self { force: Vec3::new(u[0], u[1], u[2]), moment: Vec3::new(u[3], u[4], u[5]) }
    }
}

/// Rigid-body parameters of the predicted payload.
#[derive(Debug, Clone, PartialEq)]
pub struct PayloadModel {
    pub mass: f64,
    pub inertia: Mat3,
    pub gravity: Vec3,
}

impl PayloadModel {
    /// Wrench that holds the payload still.
    pub fn hover_wrench(&self) -> WrenchU {
        WrenchU { force: -self.mass * self.gravity, moment: Vec3::zeros() }
    }

    fn derivative(&self, x: &Vec12, u: &Vector6<f64>) -> Result<Vec12, GimbalDomainError> {
        let s = NmpcStateX::from_vector(x);
        let gamma = euler_rate_transform(&s.att)?;
        let f = Vec3::new(u[0], u[1], u[2]);
        let m = Vec3::new(u[3], u[4], u[5]);
        let jw = self.inertia * s.omega;
        let wdot = self
            .inertia
            .try_inverse()
            .expect("payload inertia validated as positive definite")
            * (m - s.omega.cross(&jw));
        let mut d = Vec12::zeros();
        d.fixed_rows_mut::<3>(0).copy_from(&s.v);
        d.fixed_rows_mut::<3>(3).copy_from(&(gamma * s.omega));
        d.fixed_rows_mut::<3>(6).copy_from(&(self.gravity + f / self.mass));
        d.fixed_rows_mut::<3>(9).copy_from(&wdot);
        Ok(d)
    }
}

/// One RK4 step of the payload rigid body under a constant wrench.
pub fn prediction_model(
    x: &NmpcStateX,
    u: &WrenchU,
    model: &PayloadModel,
    dt: f64,
) -> Result<NmpcStateX, GimbalDomainError> {
    step_vec(&x.to_vector(), &u.to_vector(), model, dt).map(|v| NmpcStateX::from_vector(&v))
}

pub(crate) fn step_vec(
    x: &Vec12,
    u: &Vector6<f64>,
    model: &PayloadModel,
    dt: f64,
) -> Result<Vec12, GimbalDomainError> {
    let k1 = model.derivative(x, u)?;
    let k2 = model.derivative(&(x + k1 * (0.5 * dt)), u)?;
    let k3 = model.derivative(&(x + k2 * (0.5 * dt)), u)?;
    let k4 = model.derivative(&(x + k3 * dt), u)?;
    Ok(x + (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (dt / 6.0))
}
