//! The closed loop: sensing, mapping, planning, event-triggered NMPC,
//! allocation, per-quadrotor control and physics, on one deterministic clock.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, EventRecord, Metrics, NmpcRecord, PlanRecord, RunLog, StateRecord};
use super::scenario::{Scenario, SimConfig};
use crate::control::{cable_setpoint, ControlOutput, QuadController};
use crate::dynamics::{attachment_acceleration, attachment_point, integrate_rk4, saturate_thrust, BodyState, QuadInput, SystemState};
use crate::nmpc::{
    cable_commands, project_tension, shift_warm_start, should_trigger, solve_nmpc, CableCommand, MU_MIN, NmpcParams,
    NmpcStateX, PayloadModel, WrenchU,
};
use crate::perception::{
    detect_events, manage_tracks, sense_dynamic, sense_static, Channel, Detection, EventSet, SensingConfig,
    TrackStore, TriggerConfig, TriggerMode,
};
use crate::planner::{plan_path, sample_reference, DesiredState, Plan, PlannerError, SplineTrajectory};
use crate::world::{integrate_detections, OccupancyGrid};
use crate::{Mat3, Vec3};

/// Spacing of the reference samples handed to the event detector [s].
const REFERENCE_SAMPLE_DT: f64 = 0.25;
/// Minimum spacing between stored positions of one track [m].
const HISTORY_SPACING: f64 = 0.5;
/// Spacing of predicted positions blocked out for a replan [s].
const PREDICTION_STEP: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    GoalReached,
    Timeout,
    Blocked,
    Fault(String),
}

impl RunStatus {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunStatus::GoalReached => 0,
            RunStatus::Timeout => 2,
            RunStatus::Blocked => 3,
            RunStatus::Fault(_) => 4,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::GoalReached => "goal_reached",
            RunStatus::Timeout => "timeout",
            RunStatus::Blocked => "blocked",
            RunStatus::Fault(_) => "fault",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: RunLog,
    pub metrics: Metrics,
    pub status: RunStatus,
}

struct ActivePlan {
    traj: SplineTrajectory,
    t_start: f64,
    /// `(simulation time, position)` along the whole trajectory.
    samples: Vec<(f64, Vec3)>,
}

impl ActivePlan {
    fn new(traj: SplineTrajectory, t_start: f64) -> Self {
        let duration = traj.duration();
        let n = (duration / REFERENCE_SAMPLE_DT).ceil() as usize;
        let mut samples: Vec<(f64, Vec3)> = (0..n)
            .map(|i| {
                let tau = i as f64 * REFERENCE_SAMPLE_DT;
                (t_start + tau, traj.position(tau))
            })
            .collect();
        samples.push((t_start + duration, traj.position(duration)));
        Self { traj, t_start, samples }
    }

    fn reference(&self, t: f64) -> DesiredState {
        sample_reference(&self.traj, t - self.t_start)
    }

    /// Samples from the one at or before `t` to the end.
    fn remaining(&self, t: f64) -> &[(f64, Vec3)] {
        let i = self.samples.partition_point(|(ts, _)| *ts < t);
        &self.samples[i.saturating_sub(1)..]
    }
}

/// Critically damped second-order smoothing of the per-cable force commands,
/// so the quadrotors see continuous cable directions and rates instead of the
/// steps of a zero-order-held NMPC input.
struct CommandFilter {
    omega_n: f64,
    mu: Vec<Vec3>,
    mu_dot: Vec<Vec3>,
    xi: Vec<Vec3>,
}

impl CommandFilter {
    fn new(omega_n: f64, n: usize) -> Self {
        Self { omega_n, mu: Vec::new(), mu_dot: vec![Vec3::zeros(); n], xi: vec![-Vec3::z(); n] }
    }

    fn step(&mut self, target: &[Vec3], dt: f64) {
        if self.mu.is_empty() {
            self.mu = target.to_vec();
            return;
        }
        let w = self.omega_n;
        for ((mu, mu_dot), goal) in self.mu.iter_mut().zip(&mut self.mu_dot).zip(target) {
            *mu_dot += (w * w * (goal - *mu) - 2.0 * w * *mu_dot) * dt;
            *mu += *mu_dot * dt;
        }
    }

    /// Cable direction `-μ/|μ|` and its angular velocity `ξ × ξ̇`.
    fn direction(&mut self, k: usize) -> (Vec3, Vec3) {
        let n = self.mu[k].norm();
        if !(n > MU_MIN) {
            return (self.xi[k], Vec3::zeros());
        }
        let xi = -self.mu[k] / n;
        let xi_dot = -(self.mu_dot[k] - xi * xi.dot(&self.mu_dot[k])) / n;
        self.xi[k] = xi;
        (xi, xi.cross(&xi_dot))
    }

    fn total(&self) -> Vec3 {
        self.mu.iter().sum()
    }
}

enum Stop {
    Blocked,
    Fault(String),
}

struct Runner<'a> {
    sc: &'a Scenario,
    cfg: &'a SimConfig,
    sensing: SensingConfig,
    trigger: TriggerConfig,
    model: PayloadModel,
    nmpc: NmpcParams,
    state: SystemState,
    grid: OccupancyGrid,
    tracks: TrackStore,
    history: BTreeMap<u32, VecDeque<(f64, Vec3)>>,
    plan: Option<ActivePlan>,
    next_plan_id: u32,
    last_replan: f64,
    deferred_replan: Option<EventSet>,
    pending: EventSet,
    u_seq: Vec<WrenchU>,
    since_solve: u32,
    cables: Option<CableCommand>,
    filter: CommandFilter,
    inertia_inv: Mat3,
    controllers: Vec<QuadController>,
    outputs: Vec<ControlOutput>,
    log: RunLog,
}

/// Runs `scenario` under `config` until the goal is reached, time runs out,
/// the goal becomes unreachable or the simulation faults.
pub fn run(scenario: &Scenario, config: &SimConfig) -> RunOutput {
    let mut runner = Runner::new(scenario, config);
    let status = runner.execute();
    runner.log.status = status.label().to_string();
    if let RunStatus::Fault(kind) = &status {
        log::error!("run ended with a fault: {kind}");
    }
    let metrics = compute_metrics(&runner.log);
    RunOutput { log: runner.log, metrics, status }
}

/// Quadrotors hanging straight above their attachments with each cable
/// stretched to carry an equal share of the payload weight.
pub fn initial_state(scenario: &Scenario) -> SystemState {
    let p = &scenario.params.payload;
    let payload = BodyState::at_rest(scenario.payload_start);
    let share = p.mass * crate::GRAVITY / p.attachments.len() as f64;
    let height = p.cable_length + share / p.cable_stiffness;
    let quads = p
        .attachments
        .iter()
        .map(|r| BodyState::at_rest(attachment_point(&payload, r) + Vec3::new(0.0, 0.0, height)))
        .collect();
    SystemState::new(0.0, payload, quads, &scenario.params).expect("cables are vertical and non-degenerate")
}

impl<'a> Runner<'a> {
    fn new(sc: &'a Scenario, cfg: &'a SimConfig) -> Self {
        let f = &sc.file;
        let model = sc.payload_model();
        let nmpc = NmpcParams { dt_c: cfg.dt_c, ..f.nmpc.params(&model) };
        let controllers = sc
            .params
            .quads
            .iter()
            .map(|q| QuadController::new(f.control, q.mass, q.inertia))
            .collect();
        Self {
            sc,
            cfg,
            sensing: SensingConfig {
                rng_seed: cfg.seed,
                static_period: cfg.static_period,
                dynamic_period: cfg.dynamic_period,
                ..f.sensing.clone()
            },
            trigger: TriggerConfig { mode: cfg.trigger_mode, ..f.trigger.clone() },
            model,
            nmpc,
            state: initial_state(sc),
            grid: sc.initial_grid(),
            tracks: TrackStore::default(),
            history: BTreeMap::new(),
            plan: None,
            next_plan_id: 0,
            last_replan: f64::NEG_INFINITY,
            deferred_replan: None,
            pending: EventSet::empty(0.0),
            u_seq: Vec::new(),
            since_solve: f.trigger.k_max,
            cables: None,
            filter: CommandFilter::new(f.sim.command_bandwidth, sc.params.quads.len()),
            inertia_inv: sc.params.payload.inertia.try_inverse().expect("inertia validated positive definite"),
            controllers,
            outputs: vec![ControlOutput::default(); sc.params.quads.len()],
            log: RunLog { mission_start: cfg.preroll, ..Default::default() },
        }
    }

    fn execute(&mut self) -> RunStatus {
        let dt = self.cfg.dt;
        let control_steps = self.cfg.steps(self.cfg.dt_c).expect("validated");
        let static_steps = self.cfg.steps(self.cfg.static_period).expect("validated");
        let dynamic_steps = self.cfg.steps(self.cfg.dynamic_period).expect("validated");
        let final_step = (self.cfg.t_final / dt).round() as u64;
        let goal = self.sc.goal();
        let file = &self.sc.file.sim;

        let mut k: u64 = 0;
        loop {
            let t = k as f64 * dt;
            self.state.time = t;
            let static_tick = k.is_multiple_of(static_steps as u64);
            let dynamic_tick = k.is_multiple_of(dynamic_steps as u64);
            let status = (|| -> Result<(), Stop> {
                if static_tick || dynamic_tick {
                    self.sense(t, static_tick, dynamic_tick)?;
                }
                if k.is_multiple_of(control_steps as u64) {
                    self.control_tick(t)?;
                }
                self.inner_loop(dt);
                Ok(())
            })();
            match status {
                Err(Stop::Blocked) => return self.finish(t, RunStatus::Blocked),
                Err(Stop::Fault(kind)) => return self.finish(t, RunStatus::Fault(kind)),
                Ok(()) => {}
            }
            if k.is_multiple_of(self.cfg.decimation as u64) {
                self.record(t);
            }
            let payload = &self.state.payload;
            if t >= self.cfg.preroll
                && (payload.position - goal).norm() <= file.goal_tolerance
                && payload.velocity.norm() < file.goal_speed
            {
                self.log.goal_time = Some(t);
                return self.finish(t, RunStatus::GoalReached);
            }
            if k >= final_step {
                return self.finish(t, RunStatus::Timeout);
            }
            let inputs: Vec<QuadInput> = self
                .outputs
                .iter()
                .map(|o| QuadInput { thrust: o.command.f, torque: o.command.m })
                .collect();
            match integrate_rk4(&self.state, &inputs, &self.sc.params, dt) {
                Ok(next) => self.state = next,
                Err(e) => return self.finish(t, RunStatus::Fault(format!("dynamics: {e}"))),
            }
            k += 1;
        }
    }

    fn finish(&mut self, t: f64, status: RunStatus) -> RunStatus {
        self.log.final_time = t;
        status
    }

    fn quad_positions(&self) -> Vec<Vec3> {
        self.state.quads.iter().map(|q| q.position).collect()
    }

    fn tracking_error(&self, t: f64) -> f64 {
        self.plan
            .as_ref()
            .map(|p| (self.state.payload.position - p.reference(t).p_d).norm())
            .unwrap_or(0.0)
    }

    fn sense(&mut self, t: f64, static_tick: bool, dynamic_tick: bool) -> Result<(), Stop> {
        let quads = self.quad_positions();
        let mut new_cells = Vec::new();
        if static_tick {
            let detections = sense_static(&self.sc.world, &quads, &self.sensing, t);
            let (grid, added) = integrate_detections(&self.grid, &detections);
            self.grid = grid;
            new_cells = added;
        }
        if dynamic_tick {
            let detections = sense_dynamic(&self.sc.world, &quads, &self.sensing, t);
            self.tracks = manage_tracks(&self.tracks, &detections, &self.sc.file.tracker, t);
            self.update_history(t);
        }

        if self.plan.is_none() {
            self.replan(t)?;
            return Ok(());
        }

        let plan = self.plan.as_ref().expect("set above");
        let err = self.tracking_error(t);
        let ev = detect_events(&new_cells, &self.grid, &self.tracks.tracks, plan.remaining(t), &self.trigger, err, t);
        if !ev.is_empty() {
            self.log.events.push(EventRecord {
                t,
                kinds: ev.kinds().into_iter().map(String::from).collect(),
                new_cells: ev.new_static_cells.len(),
                conflicts: ev.conflict_events.clone(),
                tracking_error: err,
                replan: None,
            });
            self.pending.merge(&ev);
            if ev.needs_replan() {
                self.deferred_replan.get_or_insert_with(|| EventSet::empty(t)).merge(&ev);
            }
        }
        if self.deferred_replan.is_some() && t - self.last_replan >= self.sc.file.sim.replan_cooldown - 1e-9 {
            let events = self.deferred_replan.take().expect("checked");
            let id = self.replan(t)?;
            // the new reference must reach the NMPC even if the trigger came earlier
            self.pending.merge(&events);
            if let Some(last) = self.log.events.last_mut() {
                last.replan = Some(id);
            }
        }
        Ok(())
    }

    fn update_history(&mut self, t: f64) {
        let memory = self.sc.file.sim.track_memory;
        let live: Vec<u32> = self.tracks.tracks.iter().map(|tr| tr.id).collect();
        self.history.retain(|id, _| live.contains(id));
        for tr in &self.tracks.tracks {
            let h = self.history.entry(tr.id).or_default();
            let p = tr.position();
            if tr.misses == 0 && h.back().is_none_or(|(_, last)| (p - last).norm() >= HISTORY_SPACING) {
                h.push_back((t, p));
            }
            while h.front().is_some_and(|(ts, _)| t - ts > memory) {
                h.pop_front();
            }
        }
    }

    /// Current map with every tracked obstacle's recent and predicted positions blocked.
    fn overlay_grid(&self, t: f64) -> Option<OccupancyGrid> {
        let mut detections = Vec::new();
        for tr in &self.tracks.tracks {
            let mut push = |p: Vec3| {
                detections.push(Detection {
                    obstacle_id: None,
                    position: p,
                    radius: tr.radius,
                    channel: Channel::Dynamic,
                    timestamp: t,
                })
            };
            if let Some(h) = self.history.get(&tr.id) {
                h.iter().for_each(|(_, p)| push(*p));
            }
            let steps = (self.trigger.t_pred / PREDICTION_STEP).ceil() as usize;
            for i in 0..=steps {
                push(tr.position_at(t + i as f64 * PREDICTION_STEP));
            }
        }
        (!detections.is_empty()).then(|| integrate_detections(&self.grid, &detections).0)
    }

    /// Plans from the current payload position, first around the moving
    /// obstacles and then, if that fails, on the static map alone.
    fn replan(&mut self, t: f64) -> Result<u32, Stop> {
        let start = self.state.payload.position;
        let goal = self.sc.goal();
        let params = &self.sc.file.planner;
        let attempt = |grid: &OccupancyGrid| -> Result<Plan, PlannerError> { plan_path(grid, &start, &goal, params) };
        let mut overlay = false;
        let mut result = Err(PlannerError::NoPath);
        if let Some(g) = self.overlay_grid(t) {
            result = attempt(&g);
            overlay = result.is_ok();
        }
        if result.is_err() {
            result = attempt(&self.grid);
        }
        let plan = match result {
            Ok(p) => p,
            Err(e) => {
                log::warn!("t = {t:.3}: no path to the goal ({e})");
                return Err(Stop::Blocked);
            }
        };
        let id = self.next_plan_id;
        self.next_plan_id += 1;
        let t_start = t.max(self.cfg.preroll);
        self.log.plans.push(PlanRecord {
            id,
            t,
            t_start,
            duration: plan.trajectory.duration(),
            overlay,
            waypoints: plan.knots.waypoints.clone(),
        });
        log::debug!("t = {t:.3}: plan {id} with {} knots, {:.1} s", plan.knots.waypoints.len(), plan.trajectory.duration());
        self.plan = Some(ActivePlan::new(plan.trajectory, t_start));
        self.last_replan = t;
        Ok(id)
    }

    fn control_tick(&mut self, t: f64) -> Result<(), Stop> {
        let plan = self.plan.as_ref().expect("planned at the first sensing tick");
        let x0 = NmpcStateX::from(&self.state.payload);
        if !self.u_seq.is_empty() {
            self.u_seq = shift_warm_start(&self.u_seq);
        }
        let fire = self.u_seq.is_empty() || should_trigger(&self.pending, self.since_solve, &self.trigger);
        let reason = match (self.trigger.mode, self.pending.is_empty()) {
            _ if !fire => "reuse",
            (TriggerMode::Periodic, _) => "periodic",
            (TriggerMode::Event, false) => "events",
            (TriggerMode::Event, true) => "k_max",
        };
        let mut record = NmpcRecord {
            t,
            solved: fire,
            trigger: reason.to_string(),
            iterations: 0,
            cost: f64::NAN,
            converged: false,
            u0: [0.0; 6],
        };
        if fire {
            let reference: Vec<DesiredState> =
                (0..=self.nmpc.horizon).map(|i| plan.reference(t + i as f64 * self.nmpc.dt_c)).collect();
            let warm = (!self.u_seq.is_empty()).then_some(self.u_seq.as_slice());
            let sol = solve_nmpc(&x0, &reference, warm, &self.model, &self.nmpc)
                .map_err(|e| Stop::Fault(format!("nmpc: {e}")))?;
            record.iterations = sol.iterations;
            record.cost = sol.cost;
            record.converged = sol.converged;
            self.u_seq = sol.u_seq;
            self.since_solve = 0;
            self.pending = EventSet::empty(t);
        }
        self.since_solve += 1;

        let u0 = self.u_seq[0];
        record.u0 = u0.to_vector().into();
        self.log.nmpc.push(record);
        let cmd = cable_commands(
            &u0.force,
            &u0.moment,
            &self.state.payload.rotation(),
            &self.sc.params.payload.attachments,
            self.cables.as_ref(),
            self.nmpc.dt_c,
        )
        .map_err(|e| Stop::Fault(format!("allocation: {e}")))?;
        self.cables = Some(cmd);
        Ok(())
    }

    fn inner_loop(&mut self, dt: f64) {
        let cmd = self.cables.as_ref().expect("set at the first control tick");
        self.filter.step(&cmd.mu_des, dt);
        let pp = &self.sc.params.payload;
        let payload = &self.state.payload;
        let r_l = payload.rotation();
        // motion the smoothed cable forces give the payload, which the
        // quadrotors follow so that they pass those forces on undiminished
        let accel = self.filter.total() / self.model.mass + self.model.gravity;
        let moment: Vec3 = pp.attachments.iter().zip(&self.filter.mu).map(|(r, mu)| r.cross(&(r_l.transpose() * mu))).sum();
        let w = &payload.body_rates;
        let alpha = self.inertia_inv * (moment - w.cross(&(pp.inertia * w)));
        for (i, ctrl) in self.controllers.iter_mut().enumerate() {
            let r_i = &pp.attachments[i];
            let (xi_des, omega_des) = self.filter.direction(i);
            let a_att = attachment_acceleration(payload, &accel, &alpha, r_i);
            let sp = cable_setpoint(payload, &a_att, r_i, &xi_des, &omega_des, pp.cable_length);
            let xi_now = r_l * self.state.cables[i].direction_body;
            let mu = project_tension(&xi_now, &self.filter.mu[i]);
            self.outputs[i] = ctrl.update(&self.state.quads[i], &sp, &mu, dt);
        }
    }

    fn record(&mut self, t: f64) {
        let world = &self.sc.world;
        let clearance = std::iter::once(&self.state.payload)
            .chain(&self.state.quads)
            .map(|b| world.min_clearance(&b.position, t))
            .fold(f64::INFINITY, f64::min);
        let reference = self.plan.as_ref().map(|p| p.reference(t)).unwrap_or_default();
        self.log.states.push(StateRecord {
            t,
            payload: self.state.payload,
            quads: self.state.quads.clone(),
            thrust: self
                .outputs
                .iter()
                .zip(&self.sc.params.quads)
                .map(|(o, q)| saturate_thrust(o.command.f, q.f_max))
                .collect(),
            moments: self.outputs.iter().map(|o| o.command.m).collect(),
            tensions: self.state.cables.iter().map(|c| c.tension).collect(),
            attitude_errors: self.outputs.iter().map(|o| o.e_r_norm).collect(),
            reference,
            clearance,
        });
    }
}
