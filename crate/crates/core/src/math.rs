//! Attitude kinematics shared by the simulator and the controllers.
//!
//! Euler angles follow the roll-pitch-yaw (Z-Y-X) convention: the body-to-world
//! rotation is `Rz(psi) * Ry(theta) * Rx(phi)`, and the rate map [`euler_rate_transform`]
//! takes body angular velocity to Euler angle rates for the same convention.

use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::{Mat3, Vec3};

/// Distance kept from the `|phi| = pi/2`, `|theta| = pi/2` singularity of the rate map [rad].
pub const GIMBAL_GUARD: f64 = 0.05;

/// Roll, pitch and yaw angles [rad].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerAngles {
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

impl EulerAngles {
    pub const fn new(phi: f64, theta: f64, psi: f64) -> Self {
        Self { phi, theta, psi }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(v: &Vec3) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn to_vector(&self) -> Vec3 {
        Vec3::new(self.phi, self.theta, self.psi)
    }

    pub fn is_finite(&self) -> bool {
        self.phi.is_finite() && self.theta.is_finite() && self.psi.is_finite()
    }

    /// True when roll and pitch stay at least [`GIMBAL_GUARD`] away from ±π/2.
    pub fn in_gimbal_domain(&self) -> bool {
        self.is_finite()
            && self.phi.abs() < FRAC_PI_2 - GIMBAL_GUARD
            && self.theta.abs() < FRAC_PI_2 - GIMBAL_GUARD
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_euler_angles(self.phi, self.theta, self.psi)
    }

    /// Recovers angles from a rotation matrix. Pitch is taken in `[-pi/2, pi/2]`.
    pub fn from_rotation(r: &Mat3) -> Self {
        let theta = (-r[(2, 0)]).clamp(-1.0, 1.0).asin();
        let phi = r[(2, 1)].atan2(r[(2, 2)]);
        let psi = r[(1, 0)].atan2(r[(0, 0)]);
        Self::new(phi, theta, psi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("attitude outside gimbal-safe domain (phi = {phi:.4}, theta = {theta:.4})")]
pub struct GimbalDomainError {
    pub phi: f64,
    pub theta: f64,
}

/// Body-to-world rotation for Z-Y-X Euler angles.
pub fn rotation_matrix(att: &EulerAngles) -> Mat3 {
    let (sf, cf) = att.phi.sin_cos();
    let (st, ct) = att.theta.sin_cos();
    let (sp, cp) = att.psi.sin_cos();
    Mat3::new(
        cp * ct,
        cp * st * sf - sp * cf,
        cp * st * cf + sp * sf,
        sp * ct,
        sp * st * sf + cp * cf,
        sp * st * cf - cp * sf,
        -st,
        ct * sf,
        ct * cf,
    )
}

/// Maps body angular velocity to Euler angle rates.
///
/// Fails when roll or pitch come within [`GIMBAL_GUARD`] of ±π/2, where the map
/// loses rank.
pub fn euler_rate_transform(att: &EulerAngles) -> Result<Mat3, GimbalDomainError> {
    if !att.in_gimbal_domain() {
        return Err(GimbalDomainError { phi: att.phi, theta: att.theta });
    }
    let (sf, cf) = att.phi.sin_cos();
    let (tt, ct) = (att.theta.tan(), att.theta.cos());
    Ok(Mat3::new(
        1.0,
        sf * tt,
        cf * tt,
        0.0,
        cf,
        -sf,
        0.0,
        sf / ct,
        cf / ct,
    ))
}

/// Skew-symmetric (hat) matrix with `skew(a) * b == a x b`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`] for a skew-symmetric matrix.
pub fn vee(m: &Mat3) -> Vec3 {
    Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Rotation vector (axis times angle) of a unit quaternion, using the
/// representative with non-negative scalar part so the angle lies in `[0, pi]`.
pub fn quaternion_log(q: &UnitQuaternion<f64>) -> Vec3 {
    let mut q: Quaternion<f64> = *q.quaternion();
    if q.w < 0.0 {
        q = -q;
    }
    let v = q.imag();
    let s = v.norm();
    if s < 1e-12 {
        // first-order expansion: angle ~ 2|v|
        return 2.0 * v;
    }
    let angle = 2.0 * s.atan2(q.w);
    v * (angle / s)
}

/// Rotation vector of a rotation matrix (log map of SO(3)).
pub fn rotation_log(r: &Mat3) -> Vec3 {
    let rot = nalgebra::Rotation3::from_matrix_unchecked(*r);
    quaternion_log(&UnitQuaternion::from_rotation_matrix(&rot))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_4, PI};

    #[test]
    fn zero_angles_give_identity() {
        assert_eq!(rotation_matrix(&EulerAngles::zero()), Mat3::identity());
        assert_eq!(
            euler_rate_transform(&EulerAngles::zero()).unwrap(),
            Mat3::identity()
        );
    }

    #[test]
    fn pure_pitch_quarter_turn() {
        let r = rotation_matrix(&EulerAngles::new(0.0, FRAC_PI_2, 0.0));
        let expected = Mat3::new(0.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0);
        assert_relative_eq!(r, expected, epsilon = 1e-15);
    }

    #[test]
    fn rate_map_at_roll_quarter_pi() {
        let g = euler_rate_transform(&EulerAngles::new(FRAC_PI_4, 0.0, 0.0)).unwrap();
        let h = 0.5f64.sqrt();
        let expected = Mat3::new(1.0, 0.0, 0.0, 0.0, h, -h, 0.0, h, h);
        assert_relative_eq!(g, expected, epsilon = 1e-15);
    }

    #[test]
    fn rate_map_rejects_singular_pitch() {
        let err = euler_rate_transform(&EulerAngles::new(0.0, FRAC_PI_2, 0.0));
        assert!(err.is_err());
        assert!(euler_rate_transform(&EulerAngles::new(0.0, FRAC_PI_2 - 0.049, 0.0)).is_err());
        assert!(euler_rate_transform(&EulerAngles::new(0.0, FRAC_PI_2 - 0.051, 0.0)).is_ok());
        assert!(euler_rate_transform(&EulerAngles::new(f64::NAN, 0.0, 0.0)).is_err());
    }

    #[test]
    fn rotation_agrees_with_quaternion_convention() {
        let att = EulerAngles::new(0.3, -0.7, 2.1);
        let q = att.quaternion();
        assert_relative_eq!(
            rotation_matrix(&att),
            *q.to_rotation_matrix().matrix(),
            epsilon = 1e-14
        );
        let back = EulerAngles::from_rotation(&rotation_matrix(&att));
        assert_relative_eq!(back.to_vector(), att.to_vector(), epsilon = 1e-12);
    }

    #[test]
    fn euler_kinematics_match_rotation_derivative() {
        // d/dt R(Theta) must equal R * skew(omega) when Theta' = Gamma(Theta) omega.
        let att = EulerAngles::new(0.4, -0.3, 1.2);
        let omega = Vec3::new(0.7, -1.1, 0.5);
        let rate = euler_rate_transform(&att).unwrap() * omega;
        let h = 1e-6;
        let plus = EulerAngles::from_vector(&(att.to_vector() + rate * h));
        let minus = EulerAngles::from_vector(&(att.to_vector() - rate * h));
        let dr = (rotation_matrix(&plus) - rotation_matrix(&minus)) / (2.0 * h);
        assert_relative_eq!(dr, rotation_matrix(&att) * skew(&omega), epsilon = 1e-8);
    }

    #[test]
    fn quaternion_log_quarter_turn_about_z() {
        let q = UnitQuaternion::from_euler_angles(0.0, 0.0, FRAC_PI_2);
        assert_relative_eq!(quaternion_log(&q), Vec3::new(0.0, 0.0, FRAC_PI_2), epsilon = 1e-14);
        // antipodal representative maps to the same rotation vector
        let neg = UnitQuaternion::new_unchecked(-*q.quaternion());
        assert_relative_eq!(quaternion_log(&neg), quaternion_log(&q), epsilon = 1e-14);
        assert_eq!(quaternion_log(&UnitQuaternion::identity()), Vec3::zeros());
        let half = UnitQuaternion::from_euler_angles(PI, 0.0, 0.0);
        assert_relative_eq!(quaternion_log(&half).norm(), PI, epsilon = 1e-12);
    }

    #[test]
    fn skew_vee_roundtrip() {
        let a = Vec3::new(1.0, -2.0, 3.0);
        let b = Vec3::new(0.5, 0.25, -4.0);
        assert_relative_eq!(skew(&a) * b, a.cross(&b));
        assert_eq!(vee(&skew(&a)), a);
    }
}
