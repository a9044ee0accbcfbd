//! Python bindings: load and verify scenarios, run the closed loop, and a few of
//! the planning and allocation building blocks.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use swarmlift::math::rotation_matrix;
use swarmlift::math::EulerAngles;
use swarmlift::nmpc::allocate_tensions;
use swarmlift::perception::TriggerMode;
use swarmlift::planner::{a_star_cells, cell_path_cost};
use swarmlift::sim::{export_run, load_scenario, metrics_json, Metrics, RunOutput, Scenario, SimConfig};
use swarmlift::world::{GridSpec, OccupancyGrid};
use swarmlift::Vec3;

type Triple = (f64, f64, f64);
type CellTriple = (i64, i64, i64);

fn vec3(t: Triple) -> Vec3 {
    Vec3::new(t.0, t.1, t.2)
}

fn triple(v: &Vec3) -> Triple {
    (v.x, v.y, v.z)
}

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn load(path: &str) -> PyResult<(Scenario, SimConfig)> {
    load_scenario(&PathBuf::from(path)).map_err(value_error)
}

/// Checks a scenario file and returns the length of the static-map path to the goal [m].
#[pyfunction]
fn verify(path: &str) -> PyResult<f64> {
    let (sc, _) = load(path)?;
    sc.check_reachable().map_err(value_error)
}

/// Outcome of one simulated mission.
#[pyclass(module = "swarmlift_py", frozen)]
struct RunResult {
    output: RunOutput,
}

fn metrics_dict<'py>(py: Python<'py>, m: &Metrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("status", &m.status)?;
    d.set_item("goal_reached", m.goal_reached)?;
    d.set_item("time_to_goal", m.time_to_goal)?;
    d.set_item("rms_tracking_error", m.rms_tracking_error)?;
    d.set_item("max_tracking_error", m.max_tracking_error)?;
    d.set_item("min_clearance", m.min_clearance)?;
    d.set_item("collision_count", m.collision_count)?;
    d.set_item("event_count", m.event_count)?;
    d.set_item("replan_count", m.replan_count)?;
    d.set_item("nmpc_solve_count", m.nmpc_solve_count)?;
    d.set_item("control_ticks", m.control_ticks)?;
    d.set_item("energy_proxy", m.energy_proxy)?;
    d.set_item("final_time", m.final_time)?;
    Ok(d)
}

#[pymethods]
impl RunResult {
    /// `"goal_reached"`, `"timeout"`, `"blocked"` or `"fault"`.
    #[getter]
    fn status(&self) -> &'static str {
        self.output.status.label()
    }

    /// Process exit code the command-line tool would return.
    #[getter]
    fn exit_code(&self) -> i32 {
        self.output.status.exit_code()
    }

    #[getter]
    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        metrics_dict(py, &self.output.metrics)
    }

    /// The metrics summary exactly as written to `metrics.json`.
    fn metrics_json(&self) -> String {
        metrics_json(&self.output.metrics)
    }

    /// Logged sample times [s].
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.output.log.states.iter().map(|s| s.t).collect()
    }

    #[getter]
    fn payload_positions(&self) -> Vec<Triple> {
        self.output.log.states.iter().map(|s| triple(&s.payload.position)).collect()
    }

    #[getter]
    fn reference_positions(&self) -> Vec<Triple> {
        self.output.log.states.iter().map(|s| triple(&s.reference.p_d)).collect()
    }

    /// Obstacle clearance at each logged sample [m].
    #[getter]
    fn clearances(&self) -> Vec<f64> {
        self.output.log.states.iter().map(|s| s.clearance).collect()
    }

    /// Writes the CSV, JSON-lines and metrics files into `dir`.
    fn export(&self, dir: &str) -> PyResult<()> {
        export_run(&PathBuf::from(dir), &self.output.log, &self.output.metrics).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        let m = &self.output.metrics;
        format!(
            "RunResult(status={:?}, rms_tracking_error={:.4}, nmpc_solve_count={})",
            m.status, m.rms_tracking_error, m.nmpc_solve_count
        )
    }
}

/// Simulates a scenario file with optional overrides of the stored settings.
#[pyfunction]
#[pyo3(signature = (path, seed=None, t_final=None, trigger_mode=None, decimation=None))]
fn run(
    py: Python<'_>,
    path: &str,
    seed: Option<u64>,
    t_final: Option<f64>,
    trigger_mode: Option<&str>,
    decimation: Option<usize>,
) -> PyResult<RunResult> {
    let (sc, mut cfg) = load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = t_final {
        cfg.t_final = t;
    }
    if let Some(mode) = trigger_mode {
        cfg.trigger_mode = match mode {
            "event" => TriggerMode::Event,
            "periodic" => TriggerMode::Periodic,
            other => return Err(PyValueError::new_err(format!("unknown trigger mode {other:?}"))),
        };
    }
    if let Some(k) = decimation {
        cfg.decimation = k;
    }
    cfg.validate().map_err(value_error)?;
    let output = py.detach(|| swarmlift::sim::run(&sc, &cfg));
    Ok(RunResult { output })
}

/// Cable forces (world frame) realising a world force and body moment on a
/// payload with the given attitude `(roll, pitch, yaw)` and attachment points.
#[pyfunction]
#[pyo3(signature = (force, moment, attachments, attitude=(0.0, 0.0, 0.0)))]
fn allocate(force: Triple, moment: Triple, attachments: Vec<Triple>, attitude: Triple) -> PyResult<Vec<Triple>> {
    let r_l = rotation_matrix(&EulerAngles::new(attitude.0, attitude.1, attitude.2));
    let att: Vec<Vec3> = attachments.into_iter().map(vec3).collect();
    let mu = allocate_tensions(&vec3(force), &vec3(moment), &r_l, &att).map_err(value_error)?;
    Ok(mu.iter().map(triple).collect())
}

/// Shortest 26-connected path on a unit grid of size `dims` with the listed
/// cells occupied. Returns `(cost, cells)`, or `None` when the goal is cut off.
#[pyfunction]
fn grid_path(
    dims: (usize, usize, usize),
    occupied: Vec<CellTriple>,
    start: CellTriple,
    goal: CellTriple,
) -> PyResult<Option<(f64, Vec<CellTriple>)>> {
    let spec = GridSpec { resolution: 1.0, dims: [dims.0, dims.1, dims.2] };
    let mut grid = OccupancyGrid::empty(spec).map_err(value_error)?;
    for c in occupied {
        grid.occupy(&[c.0, c.1, c.2]);
    }
    match a_star_cells(&grid, [start.0, start.1, start.2], [goal.0, goal.1, goal.2]) {
        Ok(cells) => Ok(Some((cell_path_cost(&cells, 1.0), cells.iter().map(|c| (c[0], c[1], c[2])).collect()))),
        Err(swarmlift::planner::PlannerError::NoPath) => Ok(None),
        Err(e) => Err(value_error(e)),
    }
}

#[pymodule]
fn swarmlift_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<RunResult>()?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(allocate, m)?)?;
    m.add_function(wrap_pyfunction!(grid_path, m)?)?;
    Ok(())
}
