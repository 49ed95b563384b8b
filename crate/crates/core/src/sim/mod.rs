//! Street-scene simulation: object trajectories, FMCW IF synthesis and
//! ground-truth LOS blockage labels.
//!
//! Coordinates are 2D ground-plane metres. The radar sits at the origin with
//! its receive array boresight along `+x`; angles are measured from `+x`
//! towards `+y`.

mod radar;
mod scenario;
mod scene;
mod synth;

pub use radar::RadarConfig;
pub use scenario::{
    frame_seed, generate_dataset, generate_sequence, Archetype, CrossingConfig, DistractorConfig,
    ScenarioConfig, Sequence,
};
pub use scene::{
    blockage_from_power, blockage_indicator, effective_power, step_scene, LinkModel, ObjectState,
    Scene, SceneObject, Waypoint,
};
pub use synth::{echo_geometry, synth_frame, EchoGeometry, RadarFrameCube, SynthOptions};
