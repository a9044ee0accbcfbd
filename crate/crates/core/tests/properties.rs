//! Randomised invariants across the modules.

use nalgebra::DVector;
use proptest::prelude::*;

use swarmlift::dynamics::{
    cable_forces, system_derivative, BodyState, PayloadParams, QuadInput, QuadrotorParams, SystemParams, SystemState,
};
use swarmlift::math::{euler_rate_transform, rotation_matrix, EulerAngles, GIMBAL_GUARD};
use swarmlift::nmpc::{allocate_tensions, allocation_matrix, project_tension, NmpcConfig, PayloadModel};
use swarmlift::perception::{kf_predict, kf_update, Channel, Detection, ObstacleTrack};
use swarmlift::planner::TrapezoidProfile;
use swarmlift::world::{inflate_safety, integrate_detections, GridSpec, OccupancyGrid};
use swarmlift::{gravity_vector, Mat3, Vec3};

fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn guarded_angles() -> impl Strategy<Value = EulerAngles> {
    let lim = std::f64::consts::FRAC_PI_2 - GIMBAL_GUARD - 1e-6;
    (-lim..lim, -lim..lim, -3.2..3.2).prop_map(|(phi, theta, psi)| EulerAngles::new(phi, theta, psi))
}

fn square(a: f64, z: f64) -> Vec<Vec3> {
    vec![Vec3::new(-a, -a, z), Vec3::new(-a, a, z), Vec3::new(a, -a, z), Vec3::new(a, a, z)]
}

fn system() -> SystemParams {
    let quad = QuadrotorParams {
        mass: 0.5,
        inertia: Mat3::from_diagonal(&Vec3::new(0.0023, 0.0023, 0.004)),
        f_max: 7.0,
        tau_max: 0.5,
    };
    SystemParams::new(
        vec![quad; 4],
        PayloadParams {
            mass: 0.232,
            inertia: Mat3::from_diagonal(&Vec3::new(0.00715, 0.00715, 0.01392)),
            attachments: square(0.2, 0.05),
            cable_length: 1.0,
            cable_stiffness: 5000.0,
            cable_damping: 50.0,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rotation_is_orthonormal(phi in -10.0..10.0f64, theta in -10.0..10.0f64, psi in -10.0..10.0f64) {
        let r = rotation_matrix(&EulerAngles::new(phi, theta, psi));
        prop_assert!((r.transpose() * r - Mat3::identity()).norm() <= 1e-9);
        prop_assert!((r.determinant() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn euler_rate_map_is_invertible(att in guarded_angles()) {
        let g = euler_rate_transform(&att).unwrap();
        let inv = g.try_inverse().unwrap();
        prop_assert!((g * inv - Mat3::identity()).norm() <= 1e-9);
    }

    #[test]
    fn cable_tension_is_unilateral(offset in vec3(1.5), v in vec3(2.0), att in guarded_angles()) {
        let params = system();
        let payload = BodyState { attitude: att, velocity: v, ..BodyState::at_rest(Vec3::zeros()) };
        let r = params.payload.attachments[0];
        let quad = BodyState::at_rest(payload.position + payload.rotation() * r + offset);
        prop_assume!(offset.norm() > 1e-6);
        let c = cable_forces(&quad, &payload, &r, &params.payload).unwrap();
        prop_assert!(c.tension >= 0.0);
        if offset.norm() < params.payload.cable_length {
            prop_assert_eq!(c.tension, 0.0);
            prop_assert!(!c.taut);
        }
    }

    #[test]
    fn unpowered_momentum_changes_at_weight(
        drift in prop::collection::vec(vec3(0.3), 4),
        vels in prop::collection::vec(vec3(1.0), 5),
        att in (-0.3..0.3f64, -0.3..0.3f64, -1.0..1.0f64),
    ) {
        let params = system();
        let payload = BodyState {
            attitude: EulerAngles::new(att.0, att.1, att.2),
            velocity: vels[4],
            ..BodyState::at_rest(Vec3::zeros())
        };
        let quads: Vec<BodyState> = params
            .payload
            .attachments
            .iter()
            .zip(&drift)
            .zip(&vels)
            .map(|((r, d), v)| BodyState {
                velocity: *v,
                ..BodyState::at_rest(payload.position + payload.rotation() * r + Vec3::new(0.0, 0.0, 1.0) + d)
            })
            .collect();
        let state = SystemState::new(0.0, payload, quads, &params).unwrap();
        let d = system_derivative(&state, &[QuadInput::default(); 4], &params).unwrap();
        let mut rate = d.payload.velocity * params.payload.mass;
        for (q, qp) in d.quads.iter().zip(&params.quads) {
            rate += q.velocity * qp.mass;
        }
        let total = params.payload.mass + params.quads.iter().map(|q| q.mass).sum::<f64>();
        let scale = 1.0 + state.cables.iter().map(|c| c.tension).sum::<f64>();
        prop_assert!((rate - gravity_vector() * total).norm() <= 1e-12 * scale);
    }

    #[test]
    fn allocation_reproduces_wrench(force in vec3(5.0), moment in vec3(0.2), att in guarded_angles()) {
        let attachments = square(0.2, 0.05);
        let r_l = rotation_matrix(&att);
        let mu = allocate_tensions(&force, &moment, &r_l, &attachments).unwrap();
        let stacked = DVector::from_iterator(12, mu.iter().flat_map(|m| { let b = r_l.transpose() * m; [b.x, b.y, b.z] }));
        let w = allocation_matrix(&attachments) * stacked;
        let fb = r_l.transpose() * force;
        let want = DVector::from_column_slice(&[fb.x, fb.y, fb.z, moment.x, moment.y, moment.z]);
        prop_assert!((w - want).norm() <= 1e-8);
    }

    #[test]
    fn projection_is_idempotent(xi in vec3(1.0), mu in vec3(10.0)) {
        prop_assume!(xi.norm() > 1e-3);
        let xi = xi.normalize();
        let once = project_tension(&xi, &mu);
        prop_assert_eq!(project_tension(&xi, &once), once);
        prop_assert!((once - xi * xi.dot(&mu)).norm() <= 1e-9);
    }

    #[test]
    fn wrench_projection_lands_in_box(u in prop::array::uniform6(-20.0..20.0f64)) {
        let model = PayloadModel { mass: 0.232, inertia: Mat3::identity(), gravity: gravity_vector() };
        let b = NmpcConfig::default().params(&model).bounds;
        let p = b.project(&nalgebra::Vector6::from_row_slice(&u));
        prop_assert!(b.contains(&p));
        prop_assert_eq!(b.project(&p), p);
    }

    #[test]
    fn covariance_stays_psd(steps in prop::collection::vec((0.0..1.0f64, 0.0..5.0f64, vec3(10.0), 1e-4..2.0f64), 1..60)) {
        let mut t = ObstacleTrack::new(0, Vec3::zeros(), 0.5, 0.0, 4.0, 4.0);
        for (dt, q, z, r) in steps {
            t = kf_predict(&t, dt, q).unwrap();
            t = kf_update(&t, &z, &(Mat3::identity() * r)).unwrap();
            prop_assert_eq!(t.p, t.p.transpose());
            prop_assert!(t.p.symmetric_eigenvalues().min() >= -1e-9);
        }
    }

    #[test]
    fn trapezoid_time_inverts_distance(len in 0.1..100.0f64, v in 0.2..5.0f64, a in 0.2..3.0f64, frac in 0.0..1.0f64) {
        let p = TrapezoidProfile::new(len, v, a);
        let s = frac * len;
        let (s_back, speed, _) = p.state(p.time_at(s));
        prop_assert!((s_back - s).abs() <= 1e-9 * len.max(1.0));
        prop_assert!(speed <= v + 1e-12);
    }

    #[test]
    fn detections_are_idempotent(obs in prop::collection::vec((vec3(10.0), 0.1..2.0f64), 0..6), r in 0.0..2.0f64) {
        let spec = GridSpec { resolution: 1.0, dims: [10, 10, 10] };
        let grid = inflate_safety(&OccupancyGrid::empty(spec).unwrap(), r);
        let dets: Vec<Detection> = obs
            .iter()
            .map(|(p, rad)| Detection {
                obstacle_id: None,
                position: p.add_scalar(5.0),
                radius: *rad,
                channel: Channel::Static,
                timestamp: 0.0,
            })
            .collect();
        let (once, _) = integrate_detections(&grid, &dets);
        let (twice, added) = integrate_detections(&once, &dets);
        prop_assert!(added.is_empty());
        prop_assert_eq!(once, twice);
    }
}
