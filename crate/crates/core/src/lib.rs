//! # swarmlift
//!
//! Cooperative transport of a cable-suspended rigid payload by a team of
//! quadrotors. The crate bundles a deterministic rigid-body simulator with the
//! full control stack that flies it:
//!
//! - [`dynamics`]: quadrotor and payload equations of motion coupled through
//!   tension-only elastic cables, with a fixed-step RK4 integrator.
//! - [`world`]: static boxes, moving spherical obstacles and the safety-inflated
//!   occupancy grid built up from detections.
//! - [`perception`]: simulated two-channel sensing, constant-velocity Kalman
//!   tracking and the event detector that gates replanning and NMPC solves.
//! - [`planner`]: 26-connected A*, line-of-sight pruning, trapezoidal timing and
//!   natural cubic spline references.
//! - [`nmpc`]: payload pose NMPC (Gauss-Newton single shooting), trigger policy
//!   and the wrench to cable tension allocation.
//! - [`control`]: per-quadrotor cable tracking and geometric attitude control.
//! - [`sim`]: scenario files, the closed loop, metrics and run export.
//!
//! The world frame is z-up with gravity `(0, 0, -9.81)` m/s², and rotor thrust
//! acts along `+R e_z`.

pub mod control;
pub mod dynamics;
pub mod math;
pub mod nmpc;
pub mod perception;
pub mod planner;
pub mod sim;
pub mod world;

use nalgebra::{Matrix3, Vector3};

/// 3D vector type
pub type Vec3 = Vector3<f64>;

/// 3x3 matrix type
pub type Mat3 = Matrix3<f64>;

/// Standard gravitational acceleration [m/s²]
pub const GRAVITY: f64 = 9.81;

/// Gravity vector in the z-up world frame.
pub fn gravity_vector() -> Vec3 {
    Vec3::new(0.0, 0.0, -GRAVITY)
}
