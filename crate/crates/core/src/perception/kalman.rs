use nalgebra::{Matrix3x6, Matrix6, Vector6};

use crate::{Mat3, Vec3};

pub type Vec6 = Vector6<f64>;
pub type Mat6 = Matrix6<f64>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KalmanError {
    #[error("non-finite input to the filter")]
    NonFinite,
    #[error("negative prediction interval {0}")]
    NegativeDt(f64),
    #[error("innovation covariance is singular")]
    SingularInnovation,
}

/// Constant-velocity estimate of one moving obstacle.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleTrack {
    pub id: u32,
    /// Position then velocity.
    pub x: Vec6,
    pub p: Mat6,
    /// Time the state refers to [s].
    pub last_update: f64,
    pub misses: u32,
    /// Bounding radius reported by the sensor [m].
    pub radius: f64,
}

impl ObstacleTrack {
    pub fn new(id: u32, position: Vec3, radius: f64, t: f64, pos_var: f64, vel_var: f64) -> Self {
        let mut x = Vec6::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&position);
        let mut p = Mat6::zeros();
        for k in 0..3 {
            p[(k, k)] = pos_var;
            p[(k + 3, k + 3)] = vel_var;
        }
        Self { id, x, p, last_update: t, misses: 0, radius }
    }

    pub fn position(&self) -> Vec3 {
        self.x.fixed_rows::<3>(0).into_owned()
    }

    pub fn velocity(&self) -> Vec3 {
        self.x.fixed_rows::<3>(3).into_owned()
    }

    /// Constant-velocity extrapolation to absolute time `t`.
    pub fn position_at(&self, t: f64) -> Vec3 {
        self.position() + self.velocity() * (t - self.last_update)
    }
}

fn transition(dt: f64) -> Mat6 {
    let mut a = Mat6::identity();
    for k in 0..3 {
        a[(k, k + 3)] = dt;
    }
    a
}

/// Discrete white-noise-acceleration covariance with acceleration variance `q`.
fn process_noise(dt: f64, q: f64) -> Mat6 {
    let (d2, d3, d4) = (dt * dt, dt * dt * dt, dt * dt * dt * dt);
    let mut m = Mat6::zeros();
    for k in 0..3 {
        m[(k, k)] = q * d4 / 4.0;
        m[(k, k + 3)] = q * d3 / 2.0;
        m[(k + 3, k)] = q * d3 / 2.0;
        m[(k + 3, k + 3)] = q * d2;
    }
    m
}

fn symmetrize(p: &Mat6) -> Mat6 {
    0.5 * (p + p.transpose())
}

/// Prediction `x <- A x`, `P <- A P A^T + Q` over `dt` seconds with acceleration
/// variance `q`.
pub fn kf_predict(track: &ObstacleTrack, dt: f64, q: f64) -> Result<ObstacleTrack, KalmanError> {
    if !dt.is_finite() || !q.is_finite() || !track.x.iter().all(|v| v.is_finite()) {
        return Err(KalmanError::NonFinite);
    }
    if dt < 0.0 {
        return Err(KalmanError::NegativeDt(dt));
    }
    if dt == 0.0 {
        return Ok(track.clone());
    }
    let a = transition(dt);
    Ok(ObstacleTrack {
        x: a * track.x,
        p: symmetrize(&(a * track.p * a.transpose() + process_noise(dt, q))),
        last_update: track.last_update + dt,
        ..track.clone()
    })
}

/// Position-only measurement update with covariance `r`, using the `(I - K H) P`
/// covariance form.
pub fn kf_update(track: &ObstacleTrack, z: &Vec3, r: &Mat3) -> Result<ObstacleTrack, KalmanError> {
    if !z.iter().all(|v| v.is_finite()) || !r.iter().all(|v| v.is_finite()) {
        return Err(KalmanError::NonFinite);
    }
    let mut h = Matrix3x6::zeros();
    h.fixed_view_mut::<3, 3>(0, 0).copy_from(&Mat3::identity());
    let s = h * track.p * h.transpose() + r;
    let s_inv = s.cholesky().ok_or(KalmanError::SingularInnovation)?.inverse();
    if !s_inv.iter().all(|v| v.is_finite()) {
        return Err(KalmanError::SingularInnovation);
    }
    let k = track.p * h.transpose() * s_inv;
    let innovation = z - h * track.x;
    let p = (Mat6::identity() - k * h) * track.p;
    Ok(ObstacleTrack { x: track.x + k * innovation, p: symmetrize(&p), ..track.clone() })
}
