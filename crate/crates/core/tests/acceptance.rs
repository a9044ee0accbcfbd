//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line; the
//! test fails if any criterion fails.

use std::collections::BinaryHeap;
use std::cmp::Reverse;
use std::path::PathBuf;
use std::thread;

use nalgebra::{DVector, Matrix6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use swarmlift::dynamics::{
    angular_momentum_world, integrate_rk4, rotational_energy, BodyState, PayloadParams, QuadInput, QuadrotorParams,
    SystemParams, SystemState,
};
use swarmlift::math::EulerAngles;
use swarmlift::nmpc::{
    allocate_tensions, allocation_matrix, cost_gradient, nmpc_cost, project_tension, rollout, solve_nmpc, Mat12,
    NmpcConfig, NmpcParams, NmpcStateX, PayloadModel, WrenchBounds, WrenchU,
};
use swarmlift::perception::{kf_predict, kf_update, ObstacleTrack};
use swarmlift::planner::{a_star_cells, cell_path_cost, fit_cubic_spline, fit_timed_spline, DesiredState, TimeLaw, WaypointPath};
use swarmlift::sim::{load_scenario, metrics_json, run, RunOutput, RunStatus};
use swarmlift::perception::TriggerMode;
use swarmlift::world::{Cell, GridSpec, OccupancyGrid};
use swarmlift::{gravity_vector, Mat3, Vec3};

type Outcome = Result<String, String>;

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// 1. torque-free spin and ballistic flight

fn quad_params() -> QuadrotorParams {
    QuadrotorParams { mass: 0.5, inertia: Mat3::from_diagonal(&Vec3::new(0.0023, 0.0023, 0.004)), f_max: 7.0, tau_max: 0.5 }
}

fn free_system(payload_inertia: Mat3) -> SystemParams {
    let a = 0.2;
    SystemParams::new(
        vec![quad_params(); 4],
        PayloadParams {
            mass: 0.232,
            inertia: payload_inertia,
            attachments: vec![
                Vec3::new(-a, -a, 0.0),
                Vec3::new(-a, a, 0.0),
                Vec3::new(a, -a, 0.0),
                Vec3::new(a, a, 0.0),
            ],
            cable_length: 1.0,
            cable_stiffness: 5000.0,
            cable_damping: 50.0,
        },
    )
}

/// Quads half a cable length above their attachments, drifting with the payload
/// so every cable stays slack.
fn slack_quads(params: &SystemParams, velocity: Vec3) -> Vec<BodyState> {
    params
        .payload
        .attachments
        .iter()
        .map(|r| BodyState { velocity, ..BodyState::at_rest(r + Vec3::new(0.0, 0.0, 0.5)) })
        .collect()
}

fn criterion_dynamics() -> Outcome {
    let inertia = Mat3::from_diagonal(&Vec3::new(0.006, 0.009, 0.014));
    let params = free_system(inertia);
    let payload = BodyState {
        attitude: EulerAngles::new(0.05, -0.03, 0.2),
        body_rates: Vec3::new(0.05, -0.04, 1.5),
        velocity: Vec3::new(0.3, -0.2, 1.0),
        ..BodyState::at_rest(Vec3::zeros())
    };
    let quads = slack_quads(&params, payload.velocity);
    let mut state = SystemState::new(0.0, payload, quads.clone(), &params).map_err(|e| e.to_string())?;
    let inputs = vec![QuadInput::default(); 4];
    let e0 = rotational_energy(&state.payload, &inertia);
    let h0 = angular_momentum_world(&state.payload, &inertia);
    let dt = 1e-3;
    let mut ballistic = 0.0f64;
    for k in 1..=10_000 {
        state = integrate_rk4(&state, &inputs, &params, dt).map_err(|e| e.to_string())?;
        if k <= 1000 {
            let t = k as f64 * dt;
            for (q, q0) in state.quads.iter().zip(&quads) {
                let exact = q0.position + q0.velocity * t + 0.5 * gravity_vector() * t * t;
                ballistic = ballistic.max((q.position - exact).norm());
            }
        }
    }
    if state.cables.iter().any(|c| c.taut) {
        return Err("a cable became taut".into());
    }
    let de = ((rotational_energy(&state.payload, &inertia) - e0) / e0).abs();
    let dh = (angular_momentum_world(&state.payload, &inertia) - h0).norm() / h0.norm();
    check(
        de <= 1e-6 && dh <= 1e-6 && ballistic <= 1e-10,
        format!("energy drift {de:.1e}, momentum drift {dh:.1e}, ballistic error {ballistic:.1e} m"),
    )
}

// 2. A* against a Dijkstra oracle

/// Dijkstra over finite-cost cells, returning the cheapest cell path.
fn dijkstra(grid: &OccupancyGrid, start: Cell, goal: Cell) -> Option<Vec<Cell>> {
    let n = grid.num_cells();
    let si = grid.index(&start)?;
    let gi = grid.index(&goal)?;
    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[si] = 0.0;
    heap.push(Reverse((ordered(0.0), si)));
    while let Some(Reverse((d, i))) = heap.pop() {
        let d = f64::from_bits(d);
        if d > dist[i] {
            continue;
        }
        if i == gi {
            break;
        }
        let c = grid.cell_of_index(i);
        for dx in -1i64..=1 {
            for dy in -1i64..=1 {
                for dz in -1i64..=1 {
                    let k = (dx != 0) as u8 + (dy != 0) as u8 + (dz != 0) as u8;
                    if k == 0 {
                        continue;
                    }
                    let nb = [c[0] + dx, c[1] + dy, c[2] + dz];
                    let Some(j) = grid.index(&nb) else { continue };
                    if !grid.cost_index(j).is_finite() {
                        continue;
                    }
                    let nd = d + (k as f64).sqrt() * grid.resolution();
                    if nd < dist[j] {
                        dist[j] = nd;
                        parent[j] = i;
                        heap.push(Reverse((ordered(nd), j)));
                    }
                }
            }
        }
    }
    if !dist[gi].is_finite() {
        return None;
    }
    let mut path = vec![goal];
    let mut cur = gi;
    while cur != si {
        cur = parent[cur];
        path.push(grid.cell_of_index(cur));
    }
    path.reverse();
    Some(path)
}

/// Bit pattern of a non-negative float, ordered like the float itself.
fn ordered(x: f64) -> u64 {
    x.to_bits()
}

fn criterion_astar() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let spec = GridSpec { resolution: 1.0, dims: [20, 20, 20] };
    let mut solved = 0;
    for trial in 0..100 {
        let mut grid = OccupancyGrid::empty(spec).map_err(|e| e.to_string())?;
        for i in 0..grid.num_cells() {
            if rng.random_bool(0.3) {
                grid.occupy(&grid.cell_of_index(i));
            }
        }
        let free: Vec<Cell> = (0..grid.num_cells()).map(|i| grid.cell_of_index(i)).filter(|c| grid.is_free(c)).collect();
        let start = free[rng.random_range(0..free.len())];
        let goal = free[rng.random_range(0..free.len())];
        let ours = a_star_cells(&grid, start, goal).ok();
        let oracle = dijkstra(&grid, start, goal);
        match (ours, oracle) {
            (Some(a), Some(d)) => {
                let (ca, cd) = (cell_path_cost(&a, 1.0), cell_path_cost(&d, 1.0));
                if ca != cd {
                    return Err(format!("grid {trial}: a_star cost {ca} != dijkstra {cd}"));
                }
                if a.iter().any(|c| !grid.is_free(c)) {
                    return Err(format!("grid {trial}: path enters an inflated cell"));
                }
                let steps_ok = a.windows(2).all(|w| (0..3).all(|k| (w[1][k] - w[0][k]).abs() <= 1) && w[0] != w[1]);
                if a[0] != start || *a.last().unwrap() != goal || !steps_ok {
                    return Err(format!("grid {trial}: malformed path"));
                }
                solved += 1;
            }
            (None, None) => {}
            (a, d) => return Err(format!("grid {trial}: a_star found={} dijkstra found={}", a.is_some(), d.is_some())),
        }
    }
    check(solved >= 50, format!("{solved}/100 grids with a path, all costs equal the oracle"))
}

// 3. spline interpolation, continuity and derivatives

fn random_waypoints(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
    (0..n).map(|_| Vec3::new(rng.random_range(0.0..20.0), rng.random_range(0.0..20.0), rng.random_range(0.0..20.0))).collect()
}

fn near_any(t: f64, points: &[f64], eps: f64) -> bool {
    points.iter().any(|p| (t - p).abs() < eps)
}

fn criterion_spline() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w = random_waypoints(&mut rng, 8);
    let mut knots = vec![0.0];
    for _ in 1..w.len() {
        knots.push(knots.last().unwrap() + rng.random_range(0.5..3.0));
    }
    let timed = fit_cubic_spline(&w, &knots).map_err(|e| e.to_string())?;
    let path = WaypointPath::from_points(random_waypoints(&mut rng, 6));
    let profiled = fit_timed_spline(&path, 2.0, 1.0).map_err(|e| e.to_string())?;

    let mut knot_err = 0.0f64;
    let mut c1 = 0.0f64;
    let mut c2 = 0.0f64;
    for (s, pts) in [(&timed, &w), (&profiled, &path.waypoints)] {
        let u = s.knot_params();
        for (i, p) in pts.iter().enumerate() {
            knot_err = knot_err.max((s.eval_param(u[i]).0 - p).norm());
        }
        for i in 1..u.len() - 1 {
            let (_, dl, al) = s.eval_segment(i - 1, u[i]);
            let (_, dr, ar) = s.eval_segment(i, u[i]);
            c1 = c1.max((dl - dr).norm());
            c2 = c2.max((al - ar).norm());
        }
    }

    let (hv, ha) = (1e-5, 1e-3);
    let mut fd = 0.0f64;
    for (s, breaks) in [(&timed, knots.clone()), (&profiled, profile_breaks(&profiled))] {
        let (t0, t1) = (s.start_time(), s.duration());
        let mut n = 0;
        while n < 100 {
            let t = rng.random_range(t0 + ha..t1 - ha);
            if near_any(t, &breaks, 2.0 * ha) {
                continue;
            }
            n += 1;
            let (p, v, a) = s.evaluate(t);
            let v_fd = (s.position(t + hv) - s.position(t - hv)) / (2.0 * hv);
            let a_fd = (s.position(t + ha) - 2.0 * p + s.position(t - ha)) / (ha * ha);
            fd = fd.max((v - v_fd).norm() / v.norm().max(1.0));
            fd = fd.max((a - a_fd).norm() / a.norm().max(1.0));
        }
    }
    check(
        knot_err <= 1e-9 && c1 <= 1e-6 && c2 <= 1e-6 && fd <= 1e-6,
        format!("knot error {knot_err:.1e}, C1 jump {c1:.1e}, C2 jump {c2:.1e}, derivative mismatch {fd:.1e}"),
    )
}

/// Knot times plus the speed-profile phase switches, where derivatives are not smooth.
fn profile_breaks(s: &swarmlift::planner::SplineTrajectory) -> Vec<f64> {
    let mut b = s.knot_times.clone();
    if let TimeLaw::Trapezoid(p) = s.time_law() {
        b.extend([p.t_acc, p.t_acc + p.t_cruise]);
    }
    b
}

// 4. Kalman filter

fn criterion_kalman() -> Outcome {
    let (dt, q, r) = (0.1, 2.0, 0.3);
    let rm = Mat3::identity() * r;
    let mut track = ObstacleTrack::new(0, Vec3::zeros(), 0.5, 0.0, 10.0, 10.0);
    let mut gain = (0.0, 0.0);
    for _ in 0..2000 {
        track = kf_predict(&track, dt, q).map_err(|e| e.to_string())?;
        let s = track.p[(0, 0)] + r;
        gain = (track.p[(0, 0)] / s, track.p[(3, 0)] / s);
        track = kf_update(&track, &Vec3::zeros(), &rm).map_err(|e| e.to_string())?;
    }
    let lam = q.sqrt() * dt * dt / r.sqrt();
    let root = (lam * lam + 8.0 * lam).sqrt();
    let alpha = -(lam * lam + 8.0 * lam - (lam + 4.0) * root) / 8.0;
    let beta = (lam * lam + 4.0 * lam - lam * root) / 4.0;
    let gain_err = (gain.0 - alpha).abs().max((gain.1 - beta / dt).abs());

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut track = ObstacleTrack::new(1, Vec3::zeros(), 0.5, 0.0, 5.0, 5.0);
    let mut worst_eig = f64::INFINITY;
    let mut worst_asym = 0.0f64;
    for _ in 0..10_000 {
        track = kf_predict(&track, rng.random_range(0.0..0.5), rng.random_range(0.0..3.0)).map_err(|e| e.to_string())?;
        let z = Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let rv = Mat3::from_diagonal(&Vec3::new(
            rng.random_range(1e-4..1.0),
            rng.random_range(1e-4..1.0),
            rng.random_range(1e-4..1.0),
        ));
        track = kf_update(&track, &z, &rv).map_err(|e| e.to_string())?;
        worst_asym = worst_asym.max((track.p - track.p.transpose()).abs().max());
        worst_eig = worst_eig.min(track.p.symmetric_eigenvalues().min());
    }

    let truth_v = Vec3::new(1.2, -0.7, 0.4);
    let p0 = Vec3::new(3.0, 4.0, 5.0);
    let mut track = ObstacleTrack::new(2, p0, 0.5, 0.0, 1.0, 100.0);
    for k in 1..=20 {
        track = kf_predict(&track, dt, 0.01).map_err(|e| e.to_string())?;
        track = kf_update(&track, &(p0 + truth_v * (k as f64 * dt)), &(Mat3::identity() * 1e-4)).map_err(|e| e.to_string())?;
    }
    let v_err = (track.velocity() - truth_v).norm() / truth_v.norm();
    check(
        gain_err <= 1e-6 && worst_asym == 0.0 && worst_eig >= -1e-9 && v_err <= 0.05,
        format!("gain error {gain_err:.1e}, min eigenvalue {worst_eig:.1e}, velocity error {:.2}%", 100.0 * v_err),
    )
}

// 5. tension allocation

fn criterion_allocation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let attachments = [
        Vec3::new(-0.2, -0.2, 0.05),
        Vec3::new(-0.2, 0.2, 0.05),
        Vec3::new(0.2, -0.2, 0.05),
        Vec3::new(0.2, 0.2, 0.05),
    ];
    let p = allocation_matrix(&attachments);
    let mut residual = 0.0f64;
    for _ in 0..1000 {
        let att = EulerAngles::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-3.0..3.0));
        let r_l = swarmlift::math::rotation_matrix(&att);
        let f = Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(0.0..5.0));
        let m = Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
        let mu = allocate_tensions(&f, &m, &r_l, &attachments).map_err(|e| e.to_string())?;
        let stacked = DVector::from_iterator(12, mu.iter().flat_map(|x| (r_l.transpose() * x).iter().copied().collect::<Vec<_>>()));
        let w = &p * stacked;
        let fb = r_l.transpose() * f;
        let want = DVector::from_column_slice(&[fb.x, fb.y, fb.z, m.x, m.y, m.z]);
        residual = residual.max((w - want).norm());
    }

    let level = [Vec3::new(-0.2, -0.2, 0.0), Vec3::new(-0.2, 0.2, 0.0), Vec3::new(0.2, -0.2, 0.0), Vec3::new(0.2, 0.2, 0.0)];
    let weight = 0.232 * 9.81;
    let mu = allocate_tensions(&Vec3::new(0.0, 0.0, weight), &Vec3::zeros(), &Mat3::identity(), &level)
        .map_err(|e| e.to_string())?;
    let hover = mu.iter().map(|m| (m - Vec3::new(0.0, 0.0, weight / 4.0)).norm()).fold(0.0, f64::max);

    let mut idempotent = true;
    for _ in 0..1000 {
        let xi = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize();
        let mu = Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let once = project_tension(&xi, &mu);
        idempotent &= project_tension(&xi, &once) == once;
    }
    check(
        residual <= 1e-8 && hover <= 1e-9 && idempotent,
        format!("wrench residual {residual:.1e}, hover tension error {hover:.1e}, projection idempotent: {idempotent}"),
    )
}

// 6. NMPC solver

fn payload_model() -> PayloadModel {
    PayloadModel {
        mass: 0.232,
        inertia: Mat3::from_diagonal(&Vec3::new(0.00715, 0.00715, 0.01392)),
        gravity: gravity_vector(),
    }
}

fn random_state(rng: &mut ChaCha8Rng) -> NmpcStateX {
    let mut v = || Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    NmpcStateX {
        p: v(),
        att: EulerAngles::from_vector(&(v() * 0.3)),
        v: v() * 0.5,
        omega: v() * 0.3,
    }
}

fn random_reference(rng: &mut ChaCha8Rng, n: usize) -> Vec<DesiredState> {
    let dir = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    (0..=n)
        .map(|i| {
            let t = 0.1 * i as f64;
            DesiredState { p_d: dir * t, v_d: dir, ..Default::default() }
        })
        .collect()
}

fn criterion_nmpc() -> Outcome {
    let model = payload_model();
    let params = NmpcConfig::default().params(&model);

    let x0 = NmpcStateX { p: Vec3::new(5.0, 5.0, 1.0), ..Default::default() };
    let reference = vec![DesiredState::hold(x0.p); params.horizon + 1];
    let sol = solve_nmpc(&x0, &reference, None, &model, &params).map_err(|e| e.to_string())?;
    let hover_dev = (sol.u_seq[0].to_vector() - model.hover_wrench().to_vector()).norm();
    let hover_cost = sol.cost;

    // one stage, position-only terminal weight: F = (q_u F_h + w c d) / (q_u + w c²)
    let (w, qu, dt) = (7.0, 0.3, 0.2);
    let mut q_xn = Mat12::zeros();
    for k in 0..3 {
        q_xn[(k, k)] = w;
    }
    let one = NmpcParams {
        horizon: 1,
        dt_c: dt,
        q_x: Mat12::zeros(),
        q_xn,
        q_u: Matrix6::identity() * qu,
        bounds: WrenchBounds::unbounded(),
        max_iters: 20,
        cost_tol: 1e-14,
        step_tol: 1e-14,
    };
    let x1 = NmpcStateX { p: Vec3::new(0.1, -0.2, 0.3), v: Vec3::new(0.5, 0.1, -0.2), ..Default::default() };
    let target = Vec3::new(0.4, 0.3, 0.1);
    let refs = [DesiredState::default(), DesiredState::hold(target)];
    let ls = solve_nmpc(&x1, &refs, None, &model, &one).map_err(|e| e.to_string())?;
    let c = dt * dt / (2.0 * model.mass);
    let d = target - x1.p - x1.v * dt - model.gravity * (0.5 * dt * dt);
    let f_h = model.hover_wrench().force;
    let f_star = (f_h * qu + d * (w * c)) / (qu + w * c * c);
    let ls_err = (ls.u_seq[0].force - f_star).norm().max(ls.u_seq[0].moment.norm());

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let small = NmpcConfig { horizon: 10, ..Default::default() }.params(&model);
    let mut monotone = true;
    for _ in 0..50 {
        let x = random_state(&mut rng);
        let r = random_reference(&mut rng, small.horizon);
        let s = solve_nmpc(&x, &r, None, &model, &small).map_err(|e| e.to_string())?;
        monotone &= s.cost_history.windows(2).all(|p| p[1] <= p[0]);
        monotone &= s.cost <= s.cost_history[0];
    }

    let mut grad_err = 0.0f64;
    for _ in 0..10 {
        let x = random_state(&mut rng);
        let r = random_reference(&mut rng, small.horizon);
        let u: Vec<WrenchU> = (0..small.horizon)
            .map(|_| {
                let mut u = model.hover_wrench();
                u.force += Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
                u.moment = Vec3::new(rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01));
                u
            })
            .collect();
        let g = cost_gradient(&x, &r, &u, &model, &small).map_err(|e| e.to_string())?;
        let cost = |u: &[WrenchU]| {
            let xs = rollout(&x, u, &model, small.dt_c).expect("rollout in domain");
            nmpc_cost(&xs, u, &r, &model.hover_wrench(), &small)
        };
        let mut fd = DVector::zeros(6 * small.horizon);
        for k in 0..6 * small.horizon {
            let h = 1e-6;
            let (mut up, mut dn) = (u.clone(), u.clone());
            let bump = |v: &mut Vec<WrenchU>, s: f64| {
                let mut vec = v[k / 6].to_vector();
                vec[k % 6] += s;
                v[k / 6] = WrenchU::from_vector(&vec);
            };
            bump(&mut up, h);
            bump(&mut dn, -h);
            fd[k] = (cost(&up) - cost(&dn)) / (2.0 * h);
        }
        grad_err = grad_err.max((&g - &fd).norm() / fd.norm());
    }
    check(
        hover_dev <= 1e-3 && hover_cost <= 1e-6 && ls_err <= 1e-6 && monotone && grad_err <= 1e-4,
        format!(
            "hover |U0-hover| {hover_dev:.1e} N, cost {hover_cost:.1e}; least-squares error {ls_err:.1e}; \
             monotone on 50: {monotone}; gradient error {grad_err:.1e}"
        ),
    )
}

// 7-10. closed loop

fn simulate(name: &str, mode: Option<TriggerMode>) -> RunOutput {
    let (sc, mut cfg) = load_scenario(&scenario_path(name)).expect("scenario loads");
    if let Some(m) = mode {
        cfg.trigger_mode = m;
    }
    run(&sc, &cfg)
}

fn criterion_straight(out: &RunOutput) -> Outcome {
    let m = &out.metrics;
    check(
        out.status == RunStatus::GoalReached && m.rms_tracking_error <= 0.15,
        format!("status {}, rms tracking error {:.3} m", out.status.label(), m.rms_tracking_error),
    )
}

fn criterion_sec4(out: &RunOutput, r: f64) -> Outcome {
    let m = &out.metrics;
    let min = out.log.states.iter().map(|s| s.clearance).fold(f64::INFINITY, f64::min);
    let below = out.log.states.iter().filter(|s| s.clearance < r).count();
    check(
        out.status == RunStatus::GoalReached && below == 0 && m.collision_count == 0 && m.replan_count >= 1,
        format!(
            "status {}, min clearance {min:.2} m (r = {r}), {below} samples below r, {} collisions, {} replans",
            out.status.label(),
            m.collision_count,
            m.replan_count
        ),
    )
}

fn criterion_triggering(event: &RunOutput, periodic: &RunOutput) -> Outcome {
    let (e, p) = (&event.metrics, &periodic.metrics);
    let saving = 1.0 - e.nmpc_solve_count as f64 / p.nmpc_solve_count as f64;
    let degradation = e.rms_tracking_error / p.rms_tracking_error - 1.0;
    check(
        event.status == RunStatus::GoalReached
            && periodic.status == RunStatus::GoalReached
            && saving >= 0.2
            && degradation <= 0.1,
        format!(
            "solves {} vs {} ({:.0}% fewer), rms {:.3} vs {:.3} m ({:+.1}%)",
            e.nmpc_solve_count,
            p.nmpc_solve_count,
            100.0 * saving,
            e.rms_tracking_error,
            p.rms_tracking_error,
            100.0 * degradation
        ),
    )
}

fn criterion_determinism(a: &RunOutput, b: &RunOutput) -> Outcome {
    let (ja, jb) = (metrics_json(&a.metrics), metrics_json(&b.metrics));
    check(ja == jb, format!("metrics.json {} bytes, identical: {}", ja.len(), ja == jb))
}

#[test]
fn acceptance() {
    let sec4 = "paper_sec4.json";
    let (sc, _) = load_scenario(&scenario_path(sec4)).expect("scenario loads");
    let r = sc.safety_distance();

    let runs: Vec<_> = [
        ("straight_20m.json", None),
        (sec4, Some(TriggerMode::Event)),
        (sec4, Some(TriggerMode::Event)),
        (sec4, Some(TriggerMode::Periodic)),
    ]
    .into_iter()
    .map(|(name, mode)| thread::spawn(move || simulate(name, mode)))
    .collect();

    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "dynamics conservation", criterion_dynamics()),
        (2, "A* optimality", criterion_astar()),
        (3, "spline correctness", criterion_spline()),
        (4, "Kalman filter", criterion_kalman()),
        (5, "tension allocation", criterion_allocation()),
        (6, "NMPC sanity", criterion_nmpc()),
    ];
    let outs: Vec<RunOutput> = runs.into_iter().map(|h| h.join().expect("simulation thread")).collect();
    results.push((7, "straight-line tracking", criterion_straight(&outs[0])));
    results.push((8, "obstacle course mission", criterion_sec4(&outs[1], r)));
    results.push((9, "event-triggering efficiency", criterion_triggering(&outs[1], &outs[3])));
    results.push((10, "determinism", criterion_determinism(&outs[1], &outs[2])));

    let mut failed = Vec::new();
    for (n, name, res) in &results {
        match res {
            Ok(d) => println!("criterion {n:>2} PASS  {name}: {d}"),
            Err(d) => {
                println!("criterion {n:>2} FAIL  {name}: {d}");
                failed.push(*n);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
