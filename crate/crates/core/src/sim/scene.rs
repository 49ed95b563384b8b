use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A timed trajectory sample; positions between waypoints are linear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u32,
    /// Archetype label ("car", "pedestrian", ...), informational only.
    pub kind: String,
    waypoints: Vec<Waypoint>,
    /// Echo amplitude (square root of the reflected energy), unitless.
    pub rcs_gain: f64,
    /// Radius of the disk used for blockage geometry (m).
    pub extent: f64,
}

impl SceneObject {
    pub fn new(
        id: u32,
        kind: impl Into<String>,
        waypoints: Vec<Waypoint>,
        rcs_gain: f64,
        extent: f64,
    ) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "object {id} has no waypoints"
            )));
        }
        if waypoints.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::InvalidConfig(format!(
                "object {id}: waypoint times must be strictly increasing"
            )));
        }
        if !(rcs_gain > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "object {id}: rcs_gain must be > 0"
            )));
        }
        if !(extent >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "object {id}: extent must be >= 0"
            )));
        }
        Ok(Self {
            id,
            kind: kind.into(),
            waypoints,
            rcs_gain,
            extent,
        })
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    /// Position and segment velocity at time `t`, or `None` outside the span.
    ///
    /// At an interior waypoint the outgoing segment's slope is reported; at
    /// the final waypoint the last segment's. A single-waypoint object is a
    /// stationary point that exists only at that instant.
    pub fn kinematics(&self, t: f64) -> Option<([f64; 2], [f64; 2])> {
        let first = self.waypoints.first()?;
        let last = self.waypoints.last()?;
        if t < first.t || t > last.t {
            return None;
        }
        if self.waypoints.len() == 1 {
            return Some(([first.x, first.y], [0.0, 0.0]));
        }
        let seg = self
            .waypoints
            .windows(2)
            .position(|w| t < w[1].t)
            .unwrap_or(self.waypoints.len() - 2);
        let (a, b) = (self.waypoints[seg], self.waypoints[seg + 1]);
        let dt = b.t - a.t;
        let vel = [(b.x - a.x) / dt, (b.y - a.y) / dt];
        let s = t - a.t;
        Some(([a.x + vel[0] * s, a.y + vel[1] * s], vel))
    }
}

/// Snapshot of one object at one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub id: u32,
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub rcs_gain: f64,
    pub extent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    /// Seconds between consecutive frame indices.
    pub frame_period: f64,
}

/// Evaluates every object's trajectory at `frame * frame_period`.
/// Objects whose waypoint span does not cover that time are omitted.
pub fn step_scene(scene: &Scene, frame: u64) -> Vec<ObjectState> {
    let t = frame as f64 * scene.frame_period;
    scene
        .objects
        .iter()
        .filter_map(|o| {
            o.kinematics(t).map(|(position, velocity)| ObjectState {
                id: o.id,
                position,
                velocity,
                rcs_gain: o.rcs_gain,
                extent: o.extent,
            })
        })
        .collect()
}

/// Fixed mmWave link with effective LOS and NLOS gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    pub tx_position: [f64; 2],
    pub rx_position: [f64; 2],
    pub h_los_mag: f64,
    pub h_nlos_mag: f64,
    /// Received powers below this (linear) value are labelled blocked.
    pub power_threshold: f64,
}

impl LinkModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_nlos_mag >= 0.0 && self.h_los_mag > self.h_nlos_mag) {
            return Err(Error::InvalidConfig(format!(
                "link needs h_los > h_nlos >= 0 (got {} and {})",
                self.h_los_mag, self.h_nlos_mag
            )));
        }
        let lo = self.h_nlos_mag.powi(2);
        let hi = (self.h_los_mag + self.h_nlos_mag).powi(2);
        if !(lo < self.power_threshold && self.power_threshold < hi) {
            return Err(Error::InvalidConfig(format!(
                "link power_threshold {} must lie in ({lo}, {hi})",
                self.power_threshold
            )));
        }
        Ok(())
    }
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let s = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let d = [ap[0] - s * ab[0], ap[1] - s * ab[1]];
    d[0].hypot(d[1])
}

/// `true` when any object's disk touches the TX-RX segment.
pub fn blockage_indicator(states: &[ObjectState], link: &LinkModel) -> bool {
    states
        .iter()
        .any(|s| point_segment_distance(s.position, link.tx_position, link.rx_position) <= s.extent)
}

/// Received power `|(1 - b) h_los + h_nlos|^2`.
pub fn effective_power(blocked: bool, link: &LinkModel) -> f64 {
    let los = if blocked { 0.0 } else { link.h_los_mag };
    (los + link.h_nlos_mag).powi(2)
}

/// The power-threshold labelling rule.
pub fn blockage_from_power(power: f64, link: &LinkModel) -> bool {
    power < link.power_threshold
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: u32, a: (f64, f64, f64), b: (f64, f64, f64)) -> SceneObject {
        SceneObject::new(
            id,
            "test",
            vec![
                Waypoint {
                    t: a.0,
                    x: a.1,
                    y: a.2,
                },
                Waypoint {
                    t: b.0,
                    x: b.1,
                    y: b.2,
                },
            ],
            1.0,
            0.5,
        )
        .unwrap()
    }

    fn link() -> LinkModel {
        LinkModel {
            tx_position: [20.0, 0.0],
            rx_position: [0.0, 0.0],
            h_los_mag: 1.0,
            h_nlos_mag: 0.1,
            power_threshold: 0.25,
        }
    }

    fn at(position: [f64; 2], extent: f64) -> ObjectState {
        ObjectState {
            id: 0,
            position,
            velocity: [0.0; 2],
            rcs_gain: 1.0,
            extent,
        }
    }

    #[test]
    fn midpoint_interpolation() {
        let scene = Scene {
            objects: vec![line(1, (0.0, 0.0, 0.0), (10.0, 10.0, 0.0))],
            frame_period: 0.5,
        };
        let s = step_scene(&scene, 10);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].position, [5.0, 0.0]);
        assert_eq!(s[0].velocity, [1.0, 0.0]);
    }

    #[test]
    fn segment_slope() {
        let o = line(1, (0.0, 0.0, 0.0), (2.0, 1.0, 3.0));
        let (p, v) = o.kinematics(0.5).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-12 && (p[1] - 0.75).abs() < 1e-12);
        assert_eq!(v, [0.5, 1.5]);
    }

    #[test]
    fn outside_span_is_omitted() {
        let single = SceneObject::new(
            3,
            "post",
            vec![Waypoint {
                t: 1.0,
                x: 1.0,
                y: 1.0,
            }],
            1.0,
            0.0,
        )
        .unwrap();
        let scene = Scene {
            objects: vec![single],
            frame_period: 0.25,
        };
        assert!(step_scene(&scene, 0).is_empty());
        assert_eq!(step_scene(&scene, 4).len(), 1);
        assert!(step_scene(&scene, 5).is_empty());
    }

    #[test]
    fn multi_segment_velocity_switches() {
        let o = SceneObject::new(
            1,
            "t",
            vec![
                Waypoint {
                    t: 0.0,
                    x: 0.0,
                    y: 0.0,
                },
                Waypoint {
                    t: 1.0,
                    x: 1.0,
                    y: 0.0,
                },
                Waypoint {
                    t: 2.0,
                    x: 1.0,
                    y: 2.0,
                },
            ],
            1.0,
            0.0,
        )
        .unwrap();
        assert_eq!(o.kinematics(0.5).unwrap().1, [1.0, 0.0]);
        assert_eq!(o.kinematics(1.0).unwrap().1, [0.0, 2.0]);
        assert_eq!(o.kinematics(2.0).unwrap(), ([1.0, 2.0], [0.0, 2.0]));
    }

    #[test]
    fn rejects_bad_objects() {
        let wp = |t| Waypoint { t, x: 0.0, y: 0.0 };
        assert!(SceneObject::new(1, "x", vec![wp(1.0), wp(1.0)], 1.0, 0.0).is_err());
        assert!(SceneObject::new(1, "x", vec![wp(0.0)], 0.0, 0.0).is_err());
        assert!(SceneObject::new(1, "x", vec![wp(0.0)], 1.0, -1.0).is_err());
        assert!(SceneObject::new(1, "x", vec![], 1.0, 0.0).is_err());
    }

    #[test]
    fn blockage_geometry() {
        let l = link();
        assert!(blockage_indicator(&[at([10.0, 0.0], 1.0)], &l));
        assert!(!blockage_indicator(&[], &l));
        assert!(!blockage_indicator(&[at([10.0, 1.5], 1.0)], &l));
        // beyond the TX end the distance is to the endpoint, not the line
        assert!(!blockage_indicator(&[at([21.5, 0.0], 1.0)], &l));
        assert!(blockage_indicator(&[at([20.9, 0.0], 1.0)], &l));
    }

    #[test]
    fn power_model() {
        let l = LinkModel {
            h_nlos_mag: 0.0,
            ..link()
        };
        assert_eq!(effective_power(false, &l), 1.0);
        assert_eq!(effective_power(true, &l), 0.0);
        let l = link();
        assert!((effective_power(true, &l) - 0.01).abs() < 1e-15);
        assert!((effective_power(false, &l) - 1.21).abs() < 1e-12);
        for b in [false, true] {
            assert_eq!(blockage_from_power(effective_power(b, &l), &l), b);
        }
    }

    #[test]
    fn link_validation() {
        link().validate().unwrap();
        let bad = LinkModel {
            power_threshold: 2.0,
            ..link()
        };
        assert!(bad.validate().is_err());
        let bad = LinkModel {
            h_nlos_mag: 1.5,
            ..link()
        };
        assert!(bad.validate().is_err());
    }
}
