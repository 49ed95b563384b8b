//! Per-frame processing chain: maps, CFAR, clustering, measurements and
//! tracking.

use serde::{Deserialize, Serialize};

use crate::detect::{
    cfar_2d, cluster_detections, extract_measurement, CfarConfig, DbscanConfig, Detection,
    ObjectMeasurement,
};
use crate::dsp::{FftConfig, MapProcessor, RangeVelocityMap, Window};
use crate::sim::{RadarConfig, RadarFrameCube, ScenarioConfig, Sequence};
use crate::tracking::{Assignment, TrackState, Tracker, TrackerConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub fft: FftConfig,
    pub cfar: CfarConfig,
    pub dbscan: DbscanConfig,
    pub tracker: TrackerConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            fft: FftConfig {
                range_window: Window::Hann,
                doppler_window: Window::Hann,
                ..FftConfig::default()
            },
            // The angle-summed map is far from exponential, so the detector's
            // P_fa-derived scale is much too conservative here.
            cfar: CfarConfig {
                alpha: 3.0,
                ..CfarConfig::default()
            },
            dbscan: DbscanConfig::default(),
            tracker: TrackerConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self, radar: &RadarConfig) -> Result<()> {
        self.fft.validate(radar)?;
        self.cfar.validate()?;
        self.dbscan.validate()?;
        self.tracker.validate()
    }
}

/// Everything extracted from one frame.
#[derive(Debug, Clone)]
pub struct FrameDetections {
    pub map: RangeVelocityMap,
    pub detections: Vec<Detection>,
    pub clusters: usize,
    pub measurements: Vec<ObjectMeasurement>,
}

/// Detection front end for one radar configuration.
#[derive(Debug)]
pub struct Detector {
    processor: MapProcessor,
    config: PipelineConfig,
}

impl Detector {
    pub fn new(radar: &RadarConfig, config: &PipelineConfig) -> Result<Self> {
        config.validate(radar)?;
        Ok(Self {
            processor: MapProcessor::new(radar, &config.fft)?,
            config: config.clone(),
        })
    }

    pub fn processor(&self) -> &MapProcessor {
        &self.processor
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn process(&self, frame: &RadarFrameCube) -> Result<FrameDetections> {
        let rd = self.processor.range_doppler(frame)?;
        let map = self.processor.range_velocity_map_fast(&rd);
        let cfar = cfar_2d(&map.data, &self.config.cfar)?;
        let clusters = cluster_detections(&cfar.detections, &self.config.dbscan);
        let source = self.processor.angle_source(&rd);
        let measurements = clusters
            .iter()
            .map(|c| extract_measurement(c, &source))
            .collect();
        Ok(FrameDetections {
            map,
            detections: cfar.detections,
            clusters: clusters.len(),
            measurements,
        })
    }
}

/// Tracking output of one frame.
#[derive(Debug, Clone)]
pub struct FrameTracks {
    pub measurements: Vec<ObjectMeasurement>,
    pub assignment: Assignment,
    /// `(track id, measurement index)` for every matched track.
    pub associations: Vec<(u64, usize)>,
    /// Live tracks after the frame's update.
    pub tracks: Vec<TrackState>,
}

/// Tracking output of a whole sequence.
#[derive(Debug, Clone)]
pub struct SequenceTracks {
    pub sequence: usize,
    pub blocked: Vec<bool>,
    pub frames: Vec<FrameTracks>,
}

impl SequenceTracks {
    pub fn track_sets(&self) -> impl Iterator<Item = &[TrackState]> {
        self.frames.iter().map(|f| f.tracks.as_slice())
    }
}

/// Synthesizes, detects and tracks every frame of a sequence in order.
pub fn track_sequence(
    detector: &Detector,
    sequence: &Sequence,
    scenario: &ScenarioConfig,
) -> Result<SequenceTracks> {
    let mut tracker = Tracker::new(detector.config.tracker.clone())?;
    let mut frames = Vec::with_capacity(sequence.len());
    for k in 0..sequence.len() {
        let frame = sequence
            .synth_frame(k, &scenario.radar, &scenario.synth, scenario.seed)
            .map_err(|e| e.context(format!("sequence {} frame {k}", sequence.id)))?;
        let out = detector
            .process(&frame)
            .map_err(|e| e.context(format!("sequence {} frame {k}", sequence.id)))?;
        let ids: Vec<u64> = tracker.tracks().iter().map(|t| t.id).collect();
        let assignment = tracker.step(&out.measurements);
        let associations = assignment
            .matches
            .iter()
            .map(|&(ti, mi)| (ids[ti], mi))
            .collect();
        frames.push(FrameTracks {
            measurements: out.measurements,
            assignment,
            associations,
            tracks: tracker.tracks().to_vec(),
        });
    }
    Ok(SequenceTracks {
        sequence: sequence.id,
        blocked: sequence.blocked.clone(),
        frames,
    })
}

/// Runs [`track_sequence`] over a dataset.
pub fn track_dataset(
    detector: &Detector,
    sequences: &[Sequence],
    scenario: &ScenarioConfig,
) -> Result<Vec<SequenceTracks>> {
    if sequences.is_empty() {
        return Err(Error::Data("no sequences to track".into()));
    }
    sequences
        .iter()
        .map(|s| track_sequence(detector, s, scenario))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_sequence, synth_frame, ObjectState, SynthOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_target_gives_one_measurement() {
        let radar = RadarConfig::default();
        let detector = Detector::new(&radar, &PipelineConfig::default()).unwrap();
        let obj = ObjectState {
            id: 0,
            position: [10.0, 4.0],
            velocity: [1.0, -3.0],
            rcs_gain: 1.0,
            extent: 0.5,
        };
        let opts = SynthOptions {
            noise_sigma: 1.0,
            path_loss: false,
        };
        let frame =
            synth_frame(&[obj], &radar, &opts, 0, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let out = detector.process(&frame).unwrap();
        assert_eq!(out.clusters, 1);
        assert_eq!(out.measurements.len(), 1);
        let m = out.measurements[0];
        let rho = 10f64.hypot(4.0);
        let v = (10.0 * 1.0 + 4.0 * -3.0) / rho;
        assert!((m.rho - rho).abs() < 0.2, "{m:?}");
        assert!((m.v - v).abs() < 0.3, "{m:?}");
        assert!((m.theta - 4f64.atan2(10.0)).abs() < 0.1, "{m:?}");
    }

    #[test]
    fn blocker_is_tracked_through_its_crossing() {
        let scenario = ScenarioConfig::default();
        let detector = Detector::new(&scenario.radar, &PipelineConfig::default()).unwrap();
        let seq = generate_sequence(&scenario, 4, scenario.seed).unwrap();
        let tracks = track_sequence(&detector, &seq, &scenario).unwrap();
        assert_eq!(tracks.frames.len(), seq.len());
        let onset = seq.onset().unwrap();
        let truth = seq.truth[onset][0].position;
        let nearest = tracks.frames[onset]
            .tracks
            .iter()
            .map(|t| {
                let [x, y] = t.position();
                (x - truth[0]).hypot(y - truth[1])
            })
            .fold(f64::INFINITY, f64::min);
        assert!(
            nearest < 1.0,
            "closest track {nearest:.2} m from the blocker"
        );
        for f in &tracks.frames {
            for &(id, m) in &f.associations {
                assert!(m < f.measurements.len());
                assert!(f.tracks.iter().any(|t| t.id == id));
            }
        }
    }

    #[test]
    fn invalid_stages_are_rejected() {
        let radar = RadarConfig::default();
        let mut cfg = PipelineConfig::default();
        cfg.dbscan.eps = 0.0;
        assert!(Detector::new(&radar, &cfg).is_err());
        let mut cfg = PipelineConfig::default();
        cfg.fft.range_fft = 100;
        assert!(cfg.validate(&radar).is_err());
        assert!(track_dataset(
            &Detector::new(&radar, &PipelineConfig::default()).unwrap(),
            &[],
            &ScenarioConfig::default()
        )
        .is_err());
    }
}
