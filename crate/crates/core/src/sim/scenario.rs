//! Scenario files: schema, validation and the derived simulation setup.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::ControlGains;
use crate::dynamics::{PayloadParams, QuadrotorParams, SystemParams};
use crate::nmpc::{NmpcConfig, PayloadModel};
use crate::perception::{SensingConfig, TrackerConfig, TriggerConfig, TriggerMode};
use crate::planner::{a_star, PlannerParams};
use crate::world::{inflate_safety, rasterize_static, Aabb, DynamicObstacleSpec, GridSpec, OccupancyGrid, WorldModel};
use crate::{Mat3, Vec3};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSection {
    /// World box `[0, extent]` [m]
    pub extent: Vec3,
    /// Grid cell edge [m]
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    /// Minimum allowed distance between any body and any obstacle [m]
    pub safety_distance: f64,
    /// Extra inflation used by the planner on top of `safety_distance`, covering
    /// the formation footprint around the payload [m]
    #[serde(default)]
    pub planning_margin: f64,
}

fn default_resolution() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadSection {
    pub start: Vec3,
    pub mass: f64,
    /// Principal moments of inertia [kg m²]
    pub inertia: Vec3,
    pub f_max: f64,
    pub tau_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayloadSection {
    pub mass: f64,
    /// Principal moments of inertia [kg m²]
    pub inertia: Vec3,
    /// Cable attachment points in the payload frame, one per quadrotor in order.
    pub attachments: Vec<Vec3>,
    pub cable_length: f64,
    #[serde(default = "default_stiffness")]
    pub cable_stiffness: f64,
    #[serde(default = "default_damping")]
    pub cable_damping: f64,
    /// Initial payload position; defaults to the centroid of the quadrotor starts.
    #[serde(default)]
    pub start: Option<Vec3>,
}

fn default_stiffness() -> f64 {
    5000.0
}

fn default_damping() -> f64 {
    50.0
}

/// Timing and termination settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    /// Physics step [s]
    pub dt: f64,
    pub t_final: f64,
    /// Hover settling time before the mission clock starts [s]
    pub preroll: f64,
    pub goal_tolerance: f64,
    pub goal_speed: f64,
    /// Minimum spacing between replans [s]
    pub replan_cooldown: f64,
    /// How long observed obstacle positions stay in the replan overlay [s]
    pub track_memory: f64,
    /// Natural frequency of the filter smoothing cable commands between
    /// control ticks [rad/s]
    pub command_bandwidth: f64,
    pub seed: u64,
    pub decimation: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 300.0,
            preroll: 2.0,
            goal_tolerance: 1.0,
            goal_speed: 0.2,
            replan_cooldown: 0.5,
            track_memory: 20.0,
            command_bandwidth: 20.0,
            seed: 0,
            decimation: 10,
        }
    }
}

/// On-disk scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: String,
    pub world: WorldSection,
    pub quads: Vec<QuadSection>,
    pub payload: PayloadSection,
    pub goal: Vec3,
    #[serde(default)]
    pub static_obstacles: Vec<Aabb>,
    #[serde(default)]
    pub dynamic_obstacles: Vec<DynamicObstacleSpec>,
    #[serde(default)]
    pub sensing: SensingConfig,
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub trigger: TriggerConfig,
    #[serde(default)]
    pub nmpc: NmpcConfig,
    #[serde(default)]
    pub planner: PlannerParams,
    #[serde(default)]
    pub control: ControlGains,
    #[serde(default)]
    pub sim: SimSection,
}

/// Run settings that may be overridden from the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub dt_c: f64,
    pub static_period: f64,
    pub dynamic_period: f64,
    pub t_final: f64,
    pub preroll: f64,
    pub trigger_mode: TriggerMode,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub decimation: usize,
}

impl SimConfig {
    /// Physics steps per period, if `period` is a positive whole multiple of `dt`.
    pub fn steps(&self, period: f64) -> Option<usize> {
        let n = (period / self.dt).round();
        (n >= 1.0 && (n * self.dt - period).abs() <= 1e-9 * period.max(1.0)).then_some(n as usize)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::Invalid(m.into()));
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if self.dt > self.dt_c {
            return bad("physics dt must not exceed the control period");
        }
        for (name, p) in [("control", self.dt_c), ("static sensing", self.static_period), ("dynamic sensing", self.dynamic_period)] {
            if self.steps(p).is_none() {
                return Err(ScenarioError::Invalid(format!("{name} period must be a multiple of dt")));
            }
        }
        if !(self.t_final > 0.0) || !(self.preroll >= 0.0) {
            return bad("t_final must be positive and preroll non-negative");
        }
        if self.decimation == 0 {
            return bad("decimation must be at least 1");
        }
        Ok(())
    }
}

/// Validated scenario with its derived models.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub params: SystemParams,
    pub world: WorldModel,
    pub grid_spec: GridSpec,
    pub payload_start: Vec3,
}

impl Scenario {
    pub fn safety_distance(&self) -> f64 {
        self.file.world.safety_distance
    }

    /// Inflation radius used for planning.
    pub fn inflation(&self) -> f64 {
        self.file.world.safety_distance + self.file.world.planning_margin
    }

    pub fn goal(&self) -> Vec3 {
        self.file.goal
    }

    pub fn payload_model(&self) -> PayloadModel {
        PayloadModel { mass: self.params.payload.mass, inertia: self.params.payload.inertia, gravity: self.params.gravity }
    }

    /// Initial planning map: empty, static obstacles are discovered by sensing.
    pub fn initial_grid(&self) -> OccupancyGrid {
        let empty = OccupancyGrid::empty(self.grid_spec).expect("grid spec validated");
        inflate_safety(&empty, self.inflation())
    }

    /// Map with every static obstacle known, used for feasibility checks.
    pub fn static_grid(&self) -> OccupancyGrid {
        let g = rasterize_static(&self.file.static_obstacles, &self.grid_spec).expect("obstacles validated");
        inflate_safety(&g, self.inflation())
    }

    /// Settings stored in the file, before command-line overrides.
    pub fn default_config(&self) -> SimConfig {
        let s = &self.file.sim;
        SimConfig {
            dt: s.dt,
            dt_c: self.file.nmpc.dt_c,
            static_period: self.file.sensing.static_period,
            dynamic_period: self.file.sensing.dynamic_period,
            t_final: s.t_final,
            preroll: s.preroll,
            trigger_mode: self.file.trigger.mode,
            seed: s.seed,
            out_dir: None,
            decimation: s.decimation,
        }
    }

    /// Parses and validates scenario JSON.
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let message = e.inner().to_string();
            let mut path = e.path().to_string();
            // point at the missing key itself rather than its parent
            if let Some(field) = message.strip_prefix("missing field `").and_then(|m| m.split('`').next()) {
                path = if path == "." { field.to_string() } else { format!("{path}.{field}") };
            }
            ScenarioError::Schema { path, message }
        })?;
        Self::from_file(file)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self, ScenarioError> {
        let invalid = |m: String| ScenarioError::Invalid(m);
        let w = &file.world;
        if !w.extent.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(invalid("world.extent must be positive".into()));
        }
        if !(w.safety_distance >= 0.0) || !(w.planning_margin >= 0.0) {
            return Err(invalid("world.safety_distance and world.planning_margin must be non-negative".into()));
        }
        if !(w.resolution > 0.0) {
            return Err(invalid("world.resolution must be positive".into()));
        }
        let grid_spec = GridSpec::covering(&w.extent, w.resolution);
        grid_spec.validate().map_err(|e| invalid(e.to_string()))?;

        if file.quads.is_empty() {
            return Err(invalid("at least one quadrotor is required".into()));
        }
        if file.payload.attachments.len() != file.quads.len() {
            return Err(invalid(format!(
                "payload.attachments has {} entries for {} quadrotors",
                file.payload.attachments.len(),
                file.quads.len()
            )));
        }
        let quads: Vec<QuadrotorParams> = file
            .quads
            .iter()
            .map(|q| QuadrotorParams { mass: q.mass, inertia: Mat3::from_diagonal(&q.inertia), f_max: q.f_max, tau_max: q.tau_max })
            .collect();
        for (i, q) in quads.iter().enumerate() {
            q.validate().map_err(|e| invalid(format!("quads[{i}]: {e}")))?;
        }
        let p = &file.payload;
        let payload = PayloadParams {
            mass: p.mass,
            inertia: Mat3::from_diagonal(&p.inertia),
            attachments: p.attachments.clone(),
            cable_length: p.cable_length,
            cable_stiffness: p.cable_stiffness,
            cable_damping: p.cable_damping,
        };
        payload.validate().map_err(|e| invalid(format!("payload: {e}")))?;

        for (i, b) in file.static_obstacles.iter().enumerate() {
            b.validate().map_err(|e| invalid(format!("static_obstacles[{i}]: {e}")))?;
        }
        for o in &file.dynamic_obstacles {
            o.validate().map_err(|e| invalid(e.to_string()))?;
        }
        file.sensing.validate().map_err(|e| invalid(format!("sensing: {e}")))?;
        file.nmpc.validate().map_err(|e| invalid(format!("nmpc: {e}")))?;
        file.control.validate().map_err(|e| invalid(format!("control: {e}")))?;
        if !(file.planner.v_max > 0.0 && file.planner.a_max > 0.0) {
            return Err(invalid("planner.v_max and planner.a_max must be positive".into()));
        }
        if !(file.sim.command_bandwidth > 0.0) {
            return Err(invalid("sim.command_bandwidth must be positive".into()));
        }
        if file.trigger.k_max == 0 || !(file.trigger.t_pred > 0.0) {
            return Err(invalid("trigger.k_max and trigger.t_pred must be positive".into()));
        }

        let payload_start = p
            .start
            .unwrap_or_else(|| file.quads.iter().map(|q| q.start).sum::<Vec3>() / file.quads.len() as f64);
        let scenario = Scenario {
            params: SystemParams::new(quads, payload),
            world: WorldModel { static_obstacles: file.static_obstacles.clone(), dynamic_obstacles: file.dynamic_obstacles.clone() },
            grid_spec,
            payload_start,
            file,
        };
        scenario.default_config().validate()?;
        scenario.check_endpoints()?;
        Ok(scenario)
    }

    fn check_endpoints(&self) -> Result<(), ScenarioError> {
        let grid = self.static_grid();
        for (what, p) in [("start", self.payload_start), ("goal", self.goal())] {
            let cell = grid
                .cell_of(&p)
                .ok_or_else(|| ScenarioError::Infeasible(format!("{what} {:?} lies outside the world", p.as_slice())))?;
            if !grid.is_free(&cell) {
                return Err(ScenarioError::Infeasible(format!(
                    "{what} {:?} lies inside an inflated obstacle",
                    p.as_slice()
                )));
            }
        }
        Ok(())
    }

    /// Whether the goal is reachable when every static obstacle is known.
    pub fn check_reachable(&self) -> Result<f64, ScenarioError> {
        let grid = self.static_grid();
        let s = grid.cell_of(&self.payload_start).expect("checked");
        let g = grid.cell_of(&self.goal()).expect("checked");
        a_star(&grid, s, g)
            .map(|p| p.cost)
            .map_err(|e| ScenarioError::Infeasible(format!("no path on the static map: {e}")))
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<(Scenario, SimConfig), ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
    let scenario = Scenario::from_json(&text)?;
    let config = scenario.default_config();
    Ok((scenario, config))
}
