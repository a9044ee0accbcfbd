//! Payload pose NMPC, the event-trigger policy and cable tension allocation.

mod allocation;
mod cost;
mod model;
mod solver;

pub use allocation::{
    allocate_tensions, allocation_matrix, cable_commands, desired_cable_direction, project_tension,
    AllocationError, CableCommand, MU_MIN,
};
pub use cost::{as_reference, nmpc_cost, state_error, Mat12, NmpcConfig, NmpcParams, WrenchBounds};
pub use model::{prediction_model, NmpcStateX, PayloadModel, Vec12, WrenchU};
pub use solver::{cost_gradient, rollout, shift_warm_start, solve_nmpc, NmpcError, NmpcSolution};

use crate::perception::{EventSet, TriggerConfig, TriggerMode};

/// Whether the controller re-solves on this control tick.
pub fn should_trigger(events: &EventSet, steps_since_solve: u32, config: &TriggerConfig) -> bool {
    match config.mode {
        TriggerMode::Periodic => true,
        TriggerMode::Event => !events.is_empty() || steps_since_solve >= config.k_max,
    }
}
