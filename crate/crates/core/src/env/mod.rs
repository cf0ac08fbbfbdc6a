//! Planar vehicle, procedurally generated obstacle worlds, laser sensing and
//! the navigation cost.

mod cost;
mod generate;
mod sensor;
mod vehicle;
mod world;

pub use cost::{CostTerms, TaskCost};
pub use generate::{generate_canyon, generate_forest, CanyonParams, ForestParams};
pub use sensor::{observe, Observation, ObservationMode, SensorConfig};
pub use vehicle::{
    index, state_difference, wrap_angle, ControlBounds, ControlInput, VehicleModel, VehicleState,
    CONTROL_DIM, STATE_DIM,
};
pub use world::{
    crash_check, raycast_laser, respawn, Circle, Corridor, FieldKind, ObstacleField, Segment,
};
