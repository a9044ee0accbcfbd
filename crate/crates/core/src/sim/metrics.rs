//! Run records and summary metrics.

use serde::{Deserialize, Serialize};

use crate::dynamics::BodyState;
use crate::planner::DesiredState;
use crate::Vec3;

/// One logged physics sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub t: f64,
    pub payload: BodyState,
    pub quads: Vec<BodyState>,
    /// Commanded collective thrust per quadrotor [N]
    pub thrust: Vec<f64>,
    /// Commanded body moments per quadrotor [N m]
    pub moments: Vec<Vec3>,
    pub tensions: Vec<f64>,
    pub attitude_errors: Vec<f64>,
    pub reference: DesiredState,
    /// Smallest obstacle clearance over the payload and all quadrotors [m]
    pub clearance: f64,
}

impl StateRecord {
    pub fn tracking_error(&self) -> f64 {
        (self.payload.position - self.reference.p_d).norm()
    }
}

/// A non-empty event set together with what the loop did about it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub kinds: Vec<String>,
    pub new_cells: usize,
    /// `(track id, predicted conflict time)`
    pub conflicts: Vec<(u32, f64)>,
    pub tracking_error: f64,
    /// Id of the plan created in response, if a replan ran.
    pub replan: Option<u32>,
}

/// Outcome of one control tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmpcRecord {
    pub t: f64,
    pub solved: bool,
    /// `"events"`, `"k_max"`, `"periodic"` or `"reuse"`.
    pub trigger: String,
    pub iterations: usize,
    pub cost: f64,
    pub converged: bool,
    /// Applied wrench: world force then body moment.
    pub u0: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub id: u32,
    pub t: f64,
    /// Start time of the trajectory on the simulation clock.
    pub t_start: f64,
    pub duration: f64,
    /// Whether moving obstacles were blocked out for this plan.
    pub overlay: bool,
    pub waypoints: Vec<Vec3>,
}

/// Everything recorded during one run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunLog {
    pub states: Vec<StateRecord>,
    pub events: Vec<EventRecord>,
    pub nmpc: Vec<NmpcRecord>,
    pub plans: Vec<PlanRecord>,
    /// Mission start on the simulation clock (end of the pre-roll) [s]
    pub mission_start: f64,
    pub status: String,
    pub final_time: f64,
    pub goal_time: Option<f64>,
}

/// Summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub status: String,
    pub goal_reached: bool,
    /// Mission time from the end of the pre-roll to goal arrival [s]
    pub time_to_goal: Option<f64>,
    pub rms_tracking_error: f64,
    pub max_tracking_error: f64,
    /// `None` when no obstacle exists (infinite clearance).
    pub min_clearance: Option<f64>,
    pub collision_count: usize,
    pub event_count: usize,
    pub replan_count: usize,
    pub nmpc_solve_count: usize,
    pub control_ticks: usize,
    /// `∫ Σ f_k dt` over the logged samples [N s]
    pub energy_proxy: f64,
    pub final_time: f64,
}

/// Summary metrics over the logged samples. Tracking statistics cover the
/// mission only; clearance and collisions cover every sample.
pub fn compute_metrics(log: &RunLog) -> Metrics {
    let mission: Vec<f64> = log
        .states
        .iter()
        .filter(|s| s.t >= log.mission_start)
        .map(StateRecord::tracking_error)
        .collect();
    let rms = if mission.is_empty() {
        0.0
    } else {
        (mission.iter().map(|e| e * e).sum::<f64>() / mission.len() as f64).sqrt()
    };
    let max = mission.iter().copied().fold(0.0, f64::max);
    let min_clearance = log.states.iter().map(|s| s.clearance).fold(f64::INFINITY, f64::min);
    let energy = log
        .states
        .windows(2)
        .map(|w| w[0].thrust.iter().sum::<f64>() * (w[1].t - w[0].t))
        .sum();
    Metrics {
        status: log.status.clone(),
        goal_reached: log.goal_time.is_some(),
        time_to_goal: log.goal_time.map(|t| t - log.mission_start),
        rms_tracking_error: rms,
        max_tracking_error: max,
        min_clearance: min_clearance.is_finite().then_some(min_clearance),
        collision_count: log.states.iter().filter(|s| s.clearance < 0.0).count(),
        event_count: log.events.len(),
        replan_count: log.plans.len().saturating_sub(1),
        nmpc_solve_count: log.nmpc.iter().filter(|r| r.solved).count(),
        control_ticks: log.nmpc.len(),
        energy_proxy: energy,
        final_time: log.final_time,
    }
}
