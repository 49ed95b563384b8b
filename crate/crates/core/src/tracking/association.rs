use serde::{Deserialize, Serialize};

use super::ukf::TrackState;
use crate::detect::ObjectMeasurement;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssociationConfig {
    pub w_pos: f64,
    pub w_vel: f64,
    pub gate: f64,
    /// Consecutive misses at which a track is removed.
    pub t_e: u32,
    /// Whether unmatched measurements start new tracks.
    pub spawn: bool,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self {
            w_pos: 1.0,
            w_vel: 0.5,
            gate: 2.5,
            t_e: 3,
            spawn: true,
        }
    }
}

impl AssociationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_pos >= 0.0 && self.w_vel >= 0.0) || self.w_pos + self.w_vel == 0.0 {
            return Err(Error::InvalidConfig(
                "association weights must be >= 0 and not both zero".into(),
            ));
        }
        if !(self.gate > 0.0) {
            return Err(Error::InvalidConfig("association gate must be > 0".into()));
        }
        if self.t_e < 1 {
            return Err(Error::InvalidConfig("t_e must be >= 1".into()));
        }
        Ok(())
    }

    /// Combined distance between a track and a measurement.
    pub fn distance(&self, track: &TrackState, m: &ObjectMeasurement) -> f64 {
        let [mx, my] = measurement_position(m);
        let (x, y, vx, vy) = (track.mean[0], track.mean[1], track.mean[2], track.mean[3]);
        let rho = x.hypot(y);
        let v_track = if rho > 0.0 {
            (x * vx + y * vy) / rho
        } else {
            0.0
        };
        self.w_pos * (x - mx).hypot(y - my) + self.w_vel * (v_track - m.v).abs()
    }
}

/// Cartesian position of a measurement.
pub fn measurement_position(m: &ObjectMeasurement) -> [f64; 2] {
    [m.rho * m.theta.cos(), m.rho * m.theta.sin()]
}

/// Result of one association round; indices refer to the input slices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    /// `(track, measurement)` pairs in the order they were selected.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_measurements: Vec<usize>,
}

impl Assignment {
    pub fn measurement_for(&self, track: usize) -> Option<usize> {
        self.matches
            .iter()
            .find(|(t, _)| *t == track)
            .map(|(_, m)| *m)
    }
}

/// Greedy one-to-one matching: repeatedly take the smallest remaining
/// distance within the gate. Ties go to the lower (track, measurement) pair.
pub fn associate(
    tracks: &[TrackState],
    measurements: &[ObjectMeasurement],
    cfg: &AssociationConfig,
) -> Assignment {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (ti, t) in tracks.iter().enumerate() {
        for (mi, m) in measurements.iter().enumerate() {
            let d = cfg.distance(t, m);
            if d <= cfg.gate {
                pairs.push((d, ti, mi));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));

    let mut track_used = vec![false; tracks.len()];
    let mut meas_used = vec![false; measurements.len()];
    let mut matches = Vec::new();
    for (_, ti, mi) in pairs {
        if !track_used[ti] && !meas_used[mi] {
            track_used[ti] = true;
            meas_used[mi] = true;
            matches.push((ti, mi));
        }
    }
    Assignment {
        matches,
        unmatched_tracks: (0..tracks.len()).filter(|i| !track_used[*i]).collect(),
        unmatched_measurements: (0..measurements.len()).filter(|i| !meas_used[*i]).collect(),
    }
}
