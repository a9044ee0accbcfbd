//! Distribution of the payload wrench over the cables.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::math::skew;
use crate::{Mat3, Vec3};

/// Tension magnitude below which a cable direction is not defined [N].
pub const MU_MIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AllocationError {
    #[error("allocation matrix has rank {rank} < 6")]
    RankDeficient { rank: usize },
    #[error("desired tension {0} N is too small to define a cable direction")]
    NearZeroTension(f64),
}

/// Per-cable commands derived from one payload wrench.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CableCommand {
    /// Desired force each cable applies to the payload, world frame [N].
    pub mu_des: Vec<Vec3>,
    /// Desired unit direction from quadrotor to attachment, world frame.
    pub xi_des: Vec<Vec3>,
    /// Desired cable angular velocity, world frame [rad/s].
    pub omega_des: Vec<Vec3>,
}

/// Body-frame map `P = [[I … I], [S(r_1) … S(r_N)]]` from stacked cable forces to
/// the payload wrench.
pub fn allocation_matrix(attachments: &[Vec3]) -> DMatrix<f64> {
    let n = attachments.len();
    let mut p = DMatrix::zeros(6, 3 * n);
    for (k, r) in attachments.iter().enumerate() {
        p.fixed_view_mut::<3, 3>(0, 3 * k).copy_from(&Mat3::identity());
        p.fixed_view_mut::<3, 3>(3, 3 * k).copy_from(&skew(r));
    }
    p
}

/// Minimum-norm cable forces realising the world force `force` and body moment
/// `moment`, returned in the world frame.
pub fn allocate_tensions(
    force: &Vec3,
    moment: &Vec3,
    r_l: &Mat3,
    attachments: &[Vec3],
) -> Result<Vec<Vec3>, AllocationError> {
    let p = allocation_matrix(attachments);
    let svd = p.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = 1e-9 * smax.max(1.0);
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < 6 {
        return Err(AllocationError::RankDeficient { rank });
    }
    let pinv = svd.pseudo_inverse(tol).expect("both factors computed");
    let f_body = r_l.transpose() * force;
    let w = DVector::from_column_slice(&[f_body.x, f_body.y, f_body.z, moment.x, moment.y, moment.z]);
    let mu = pinv * w;
    Ok((0..attachments.len())
        .map(|k| r_l * Vec3::new(mu[3 * k], mu[3 * k + 1], mu[3 * k + 2]))
        .collect())
}

/// Grid the projected tension is rounded to [N]. A power of two, so rounding is
/// exact, and far coarser than the round-off of re-projecting a projected vector.
const TENSION_QUANTUM: f64 = 1.0 / (1u64 << 30) as f64;

/// Component of `mu_des` along the cable axis `xi`, `ξ ξᵀ μ`.
///
/// The scalar along `ξ` is snapped to [`TENSION_QUANTUM`] so that projecting an
/// already-projected vector returns it bit for bit.
pub fn project_tension(xi: &Vec3, mu_des: &Vec3) -> Vec3 {
    let s = (xi.dot(mu_des) / TENSION_QUANTUM).round() * TENSION_QUANTUM;
    xi * s
}

/// Desired cable direction `ξ = -μ/|μ|` and angular velocity `ξ × ξ̇`, with `ξ̇`
/// from the previous command by a first-order difference.
pub fn desired_cable_direction(
    mu_des: &Vec3,
    previous_mu_des: Option<&Vec3>,
    dt_c: f64,
) -> Result<(Vec3, Vec3), AllocationError> {
    let n = mu_des.norm();
    if !(n > MU_MIN) {
        return Err(AllocationError::NearZeroTension(n));
    }
    let xi = -mu_des / n;
    let omega = match previous_mu_des {
        Some(prev) if prev.norm() > MU_MIN && dt_c > 0.0 => {
            let xi_prev = -prev / prev.norm();
            xi.cross(&((xi - xi_prev) / dt_c))
        }
        _ => Vec3::zeros(),
    };
    Ok((xi, omega))
}

/// Full allocation step. Cables whose desired tension vanishes keep their
/// previous direction with zero angular velocity.
pub fn cable_commands(
    force: &Vec3,
    moment: &Vec3,
    r_l: &Mat3,
    attachments: &[Vec3],
    previous: Option<&CableCommand>,
    dt_c: f64,
) -> Result<CableCommand, AllocationError> {
    let mu = allocate_tensions(force, moment, r_l, attachments)?;
    let mut cmd = CableCommand::default();
    for (k, m) in mu.iter().enumerate() {
        let prev_mu = previous.and_then(|p| p.mu_des.get(k));
        let (xi, om) = match desired_cable_direction(m, prev_mu, dt_c) {
            Ok(v) => v,
            Err(_) => {
                let held = previous.and_then(|p| p.xi_des.get(k)).copied().unwrap_or(-Vec3::z());
                (held, Vec3::zeros())
            }
        };
        cmd.mu_des.push(*m);
        cmd.xi_des.push(xi);
        cmd.omega_des.push(om);
    }
    Ok(cmd)
}
