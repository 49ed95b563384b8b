//! Multi-object tracking with one constant-velocity unscented Kalman filter
//! per object.
//!
//! State vectors are ordered `[x, y, v_x, v_y]` throughout.

mod association;
mod tracker;
mod ukf;

pub use association::{associate, measurement_position, Assignment, AssociationConfig};
pub use tracker::{manage, SpawnConfig, Tracker, TrackerConfig};
pub use ukf::{
    measure, predict, sigma_points, unscented_update, update, LinearMeasurement, MeasurementModel,
    PolarMeasurement, SigmaPoints, TrackState, UkfConfig,
};
