use nalgebra::{Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use super::association::{associate, measurement_position, Assignment, AssociationConfig};
use super::ukf::{predict, update, TrackState, UkfConfig};
use crate::detect::ObjectMeasurement;
use crate::{Error, Result};

/// Initial covariance of spawned tracks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpawnConfig {
    pub position_var: f64,
    pub velocity_var: f64,
}

impl Default for SpawnConfig {
    fn default() -> Self {
        Self {
            position_var: 0.3f64.powi(2),
            velocity_var: 2.0f64.powi(2),
        }
    }
}

impl SpawnConfig {
    pub fn track(&self, id: u64, m: &ObjectMeasurement) -> TrackState {
        let [x, y] = measurement_position(m);
        let mean = Vector4::new(x, y, m.v * m.theta.cos(), m.v * m.theta.sin());
        let cov = Matrix4::from_diagonal(&Vector4::new(
            self.position_var,
            self.position_var,
            self.velocity_var,
            self.velocity_var,
        ));
        TrackState::new(id, mean, cov)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    pub ukf: UkfConfig,
    pub association: AssociationConfig,
    pub spawn: SpawnConfig,
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        self.ukf.validate()?;
        self.association.validate()?;
        if !(self.spawn.position_var > 0.0 && self.spawn.velocity_var > 0.0) {
            return Err(Error::InvalidConfig("spawn variances must be > 0".into()));
        }
        Ok(())
    }
}

/// Applies an assignment to already-predicted tracks: matched tracks are
/// updated, the rest accumulate misses and are dropped at `t_e`, and
/// unmatched measurements spawn new tracks with ids from `next_id`.
///
/// A track whose update fails numerically is kept with its prediction and
/// counted as a miss.
pub fn manage(
    predicted: Vec<TrackState>,
    measurements: &[ObjectMeasurement],
    assignment: &Assignment,
    cfg: &TrackerConfig,
    next_id: &mut u64,
) -> Vec<TrackState> {
    let mut out = Vec::with_capacity(predicted.len() + assignment.unmatched_measurements.len());
    for (ti, track) in predicted.into_iter().enumerate() {
        let updated = assignment.measurement_for(ti).and_then(|mi| {
            let m = &measurements[mi];
            update(&track, &Vector3::new(m.rho, m.v, m.theta), &cfg.ukf).ok()
        });
        match updated {
            Some(mut t) => {
                t.misses = 0;
                t.hits += 1;
                out.push(t);
            }
            None => {
                let mut t = track;
                t.misses += 1;
                if t.misses < cfg.association.t_e {
                    out.push(t);
                }
            }
        }
    }
    if cfg.association.spawn {
        for &mi in &assignment.unmatched_measurements {
            out.push(cfg.spawn.track(*next_id, &measurements[mi]));
            *next_id += 1;
        }
    }
    out
}

/// Per-sequence track set advanced one frame at a time.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    tracks: Vec<TrackState>,
    next_id: u64,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            tracks: Vec::new(),
            next_id: 0,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn tracks(&self) -> &[TrackState] {
        &self.tracks
    }

    /// Predict, associate, update and manage; returns the assignment made
    /// against the predicted tracks.
    pub fn step(&mut self, measurements: &[ObjectMeasurement]) -> Assignment {
        let predicted: Vec<TrackState> = self
            .tracks
            .iter()
            .map(|t| predict(t, &self.config.ukf))
            .collect();
        let assignment = associate(&predicted, measurements, &self.config.association);
        self.tracks = manage(
            predicted,
            measurements,
            &assignment,
            &self.config,
            &mut self.next_id,
        );
        assignment
    }

    pub fn reset(&mut self) {
        self.tracks.clear();
        self.next_id = 0;
    }
}
