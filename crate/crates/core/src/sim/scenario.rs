//! Declarative street-crossing scenarios and trimmed blockage sequences.

use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    blockage_from_power, blockage_indicator, echo_geometry, effective_power, step_scene,
    synth_frame, LinkModel, ObjectState, RadarConfig, RadarFrameCube, Scene, SceneObject,
    SynthOptions, Waypoint,
};
use crate::{Error, Result};

/// A class of candidate blocker; every range is sampled uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Archetype {
    pub name: String,
    /// Relative sampling weight.
    pub weight: f64,
    /// Crossing speed range (m/s).
    pub speed: [f64; 2],
    /// Blockage disk radius range (m).
    pub extent: [f64; 2],
    pub rcs_gain: [f64; 2],
    /// Where along the link (m from the receiver) the object crosses.
    pub crossing_at: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossingConfig {
    /// Frames kept before the first blocked frame.
    pub frames_before: usize,
    /// Frames kept from the first blocked frame on (inclusive).
    pub frames_after: usize,
    /// Extra frames (fractional) the blocker already moves before the kept
    /// window starts.
    pub lead_frames: [f64; 2],
    /// Maximum speed along the link direction (m/s), giving slightly
    /// diagonal crossings.
    pub max_drift: f64,
}

impl Default for CrossingConfig {
    fn default() -> Self {
        Self {
            frames_before: 36,
            frames_after: 10,
            lead_frames: [0.0, 4.0],
            max_drift: 0.5,
        }
    }
}

/// Objects moving parallel to the blockers but outside the link segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistractorConfig {
    /// Chance that a sequence has distractors at all. Off by default, so
    /// every sequence is a single blockage event.
    pub presence: f64,
    /// Inclusive count range of a sequence that has distractors.
    pub count: [usize; 2],
    /// Position along the link axis (m from the receiver); keep it beyond
    /// the transmitter so distractors never block.
    pub along: [f64; 2],
    /// Initial offset across the link (m).
    pub across: [f64; 2],
    pub speed: [f64; 2],
    pub rcs_gain: [f64; 2],
    pub extent: f64,
}

impl Default for DistractorConfig {
    fn default() -> Self {
        Self {
            presence: 0.0,
            count: [1, 1],
            along: [24.0, 30.0],
            across: [-15.0, 15.0],
            speed: [0.5, 2.5],
            rcs_gain: [0.6, 1.5],
            extent: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub sequences: usize,
    pub seed: u64,
    /// Resampling budget per sequence.
    pub max_attempts: usize,
    pub radar: RadarConfig,
    pub synth: SynthOptions,
    pub link: LinkModel,
    pub crossing: CrossingConfig,
    pub distractors: DistractorConfig,
    #[serde(rename = "archetype")]
    pub archetypes: Vec<Archetype>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let archetype = |name: &str, weight, speed, extent, rcs_gain, crossing_at| Archetype {
            name: name.to_string(),
            weight,
            speed,
            extent,
            rcs_gain,
            crossing_at,
        };
        Self {
            sequences: 100,
            seed: 30,
            max_attempts: 64,
            radar: RadarConfig::default(),
            synth: SynthOptions {
                noise_sigma: 8.0,
                path_loss: false,
            },
            link: LinkModel {
                tx_position: [20.0, 0.0],
                rx_position: [0.0, 0.0],
                h_los_mag: 1.0,
                h_nlos_mag: 0.1,
                power_threshold: 0.25,
            },
            crossing: CrossingConfig::default(),
            distractors: DistractorConfig::default(),
            // A road across the link: vehicles in the middle lanes, bicycles
            // near the kerbs, pedestrians on the receiver-side sidewalk.
            archetypes: vec![
                archetype("car", 0.4, [4.0, 9.0], [1.8, 2.2], [1.5, 2.5], [8.0, 12.0]),
                archetype("bus", 0.1, [3.0, 7.0], [2.5, 3.0], [2.5, 3.5], [8.0, 12.0]),
                archetype(
                    "bicycle",
                    0.2,
                    [2.5, 5.5],
                    [0.7, 0.9],
                    [0.8, 1.2],
                    [6.5, 13.5],
                ),
                archetype(
                    "pedestrian",
                    0.3,
                    [1.0, 1.8],
                    [0.3, 0.5],
                    [0.6, 1.0],
                    [3.0, 5.0],
                ),
            ],
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| e.context(format!("scenario {}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.radar.validate()?;
        self.link.validate()?;
        if self.archetypes.is_empty() {
            return Err(Error::InvalidConfig(
                "scenario needs at least one archetype".into(),
            ));
        }
        let range_ok = |r: [f64; 2]| r[0] <= r[1] && r[0].is_finite() && r[1].is_finite();
        for a in &self.archetypes {
            if !(a.weight > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "archetype {}: weight must be > 0",
                    a.name
                )));
            }
            for (what, r) in [
                ("speed", a.speed),
                ("extent", a.extent),
                ("rcs_gain", a.rcs_gain),
                ("crossing_at", a.crossing_at),
            ] {
                if !range_ok(r) {
                    return Err(Error::InvalidConfig(format!(
                        "archetype {}: bad {what} range",
                        a.name
                    )));
                }
            }
            if !(a.speed[0] > 0.0 && a.rcs_gain[0] > 0.0 && a.extent[0] >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "archetype {}: speed and rcs_gain must be > 0, extent >= 0",
                    a.name
                )));
            }
        }
        let d = &self.distractors;
        if !(0.0..=1.0).contains(&d.presence) {
            return Err(Error::InvalidConfig(
                "distractor presence must be in [0, 1]".into(),
            ));
        }
        if d.count[0] > d.count[1]
            || !range_ok(d.along)
            || !range_ok(d.across)
            || !range_ok(d.speed)
        {
            return Err(Error::InvalidConfig("bad distractor ranges".into()));
        }
        if d.count[1] > 0 && !(d.rcs_gain[0] > 0.0 && d.rcs_gain[0] <= d.rcs_gain[1]) {
            return Err(Error::InvalidConfig(
                "distractor rcs_gain must be > 0".into(),
            ));
        }
        let c = &self.crossing;
        if c.frames_after == 0 || !range_ok(c.lead_frames) || c.lead_frames[0] < 0.0 {
            return Err(Error::InvalidConfig("bad crossing configuration".into()));
        }
        if self.synth.noise_sigma < 0.0 {
            return Err(Error::InvalidConfig("noise_sigma must be >= 0".into()));
        }
        Ok(())
    }

    pub fn sequence_len(&self) -> usize {
        self.crossing.frames_before + self.crossing.frames_after
    }
}

/// One trimmed blockage episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub id: usize,
    pub scene: Scene,
    /// Global frame index of the first kept frame.
    pub start_frame: u64,
    /// Per-frame blockage indicator over the kept window.
    pub blocked: Vec<bool>,
    /// Ground-truth object states per kept frame.
    pub truth: Vec<Vec<ObjectState>>,
    /// Archetype of the object that blocks the link.
    pub blocker: String,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.blocked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocked.is_empty()
    }

    /// Index of the first blocked frame within the window.
    pub fn onset(&self) -> Option<usize> {
        self.blocked.iter().position(|&b| b)
    }

    /// Synthesizes kept frame `k` with noise drawn from a per-frame stream,
    /// so frames can be produced independently and in any order.
    pub fn synth_frame(
        &self,
        k: usize,
        radar: &RadarConfig,
        options: &SynthOptions,
        seed: u64,
    ) -> Result<RadarFrameCube> {
        let frame = self.start_frame + k as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(seed, self.id, frame));
        synth_frame(&self.truth[k], radar, options, frame, &mut rng)
    }
}

/// Seed for the noise of one frame of one sequence.
pub fn frame_seed(seed: u64, sequence: usize, frame: u64) -> u64 {
    // splitmix64 finalizer over the combined key
    let mut z = seed
        ^ (sequence as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ frame.wrapping_mul(0xD1B5_4A32_D192_ED69);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn uniform<R: Rng>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.random_range(r[0]..r[1])
    } else {
        r[0]
    }
}

/// Generates sequence `index` of the scenario: one blocker crossing the
/// link plus distractors, trimmed to `frames_before` frames before the first
/// blocked frame and `frames_after` frames from it.
pub fn generate_sequence(scenario: &ScenarioConfig, index: usize, seed: u64) -> Result<Sequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let weights = WeightedIndex::new(scenario.archetypes.iter().map(|a| a.weight))
        .map_err(|e| Error::InvalidConfig(format!("archetype weights: {e}")))?;

    let mut last_reason = String::new();
    for _ in 0..scenario.max_attempts {
        let archetype = &scenario.archetypes[weights.sample(&mut rng)];
        match attempt(scenario, archetype, index, &mut rng) {
            Ok(seq) => return Ok(seq),
            Err(reason) => last_reason = reason,
        }
    }
    Err(Error::Generation {
        attempts: scenario.max_attempts,
        reason: format!("sequence {index}: {last_reason}"),
    })
}

pub fn generate_dataset(scenario: &ScenarioConfig) -> Result<Vec<Sequence>> {
    scenario.validate()?;
    (0..scenario.sequences)
        .map(|i| generate_sequence(scenario, i, scenario.seed))
        .collect()
}

fn attempt<R: Rng>(
    scenario: &ScenarioConfig,
    archetype: &Archetype,
    index: usize,
    rng: &mut R,
) -> std::result::Result<Sequence, String> {
    let link = &scenario.link;
    let cross = &scenario.crossing;
    let tau_f = scenario.radar.frame_s;
    let rx = link.rx_position;
    let axis = [link.tx_position[0] - rx[0], link.tx_position[1] - rx[1]];
    let link_len = axis[0].hypot(axis[1]);
    let along = [axis[0] / link_len, axis[1] / link_len];
    let normal = [-along[1], along[0]];
    let at = |a: f64, n: f64| {
        [
            rx[0] + a * along[0] + n * normal[0],
            rx[1] + a * along[1] + n * normal[1],
        ]
    };

    let speed = uniform(rng, archetype.speed);
    let extent = uniform(rng, archetype.extent);
    let rcs = uniform(rng, archetype.rcs_gain);
    let crossing = uniform(rng, archetype.crossing_at);
    let dir = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let drift = uniform(rng, [-cross.max_drift, cross.max_drift]);
    let lead = uniform(rng, cross.lead_frames);

    // The disk first touches the link at t_touch.
    let t_touch = (cross.frames_before as f64 + lead) * tau_f;
    let t_end = t_touch + 2.0 * extent / speed + (cross.frames_after as f64 + 2.0) * tau_f;
    let pos = |t: f64| {
        let dt = t - t_touch;
        at(crossing + drift * dt, dir * (speed * dt - extent))
    };
    let waypoint = |t: f64| {
        let p = pos(t);
        Waypoint {
            t,
            x: p[0],
            y: p[1],
        }
    };
    let mut objects = vec![SceneObject::new(
        0,
        archetype.name.clone(),
        vec![waypoint(0.0), waypoint(t_end)],
        rcs,
        extent,
    )
    .map_err(|e| e.to_string())?];

    let dcfg = &scenario.distractors;
    let count = if !rng.random_bool(dcfg.presence) {
        0
    } else if dcfg.count[1] > dcfg.count[0] {
        rng.random_range(dcfg.count[0]..=dcfg.count[1])
    } else {
        dcfg.count[0]
    };
    for j in 0..count {
        let a = uniform(rng, dcfg.along);
        let n0 = uniform(rng, dcfg.across);
        let v = uniform(rng, dcfg.speed) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let g = uniform(rng, dcfg.rcs_gain);
        let p0 = at(a, n0);
        let p1 = at(a, n0 + v * t_end);
        objects.push(
            SceneObject::new(
                j as u32 + 1,
                "distractor",
                vec![
                    Waypoint {
                        t: 0.0,
                        x: p0[0],
                        y: p0[1],
                    },
                    Waypoint {
                        t: t_end,
                        x: p1[0],
                        y: p1[1],
                    },
                ],
                g,
                dcfg.extent,
            )
            .map_err(|e| e.to_string())?,
        );
    }

    let scene = Scene {
        objects,
        frame_period: tau_f,
    };
    let total = (t_end / tau_f).floor() as u64;
    let mut blocked_all = Vec::with_capacity(total as usize + 1);
    let mut states_all = Vec::with_capacity(total as usize + 1);
    for k in 0..=total {
        let states = step_scene(&scene, k);
        let geometric = blockage_indicator(&states, link);
        let by_power = blockage_from_power(effective_power(geometric, link), link);
        if geometric != by_power {
            return Err(format!("frame {k}: geometric and power labels disagree"));
        }
        blocked_all.push(geometric);
        states_all.push(states);
    }
    let onset = blocked_all
        .iter()
        .position(|&b| b)
        .ok_or_else(|| "trajectory never crosses the link".to_string())?;
    if onset < cross.frames_before {
        return Err(format!(
            "onset at frame {onset} leaves too few leading frames"
        ));
    }
    let start = onset - cross.frames_before;
    let end = onset + cross.frames_after;
    if end > blocked_all.len() {
        return Err("trajectory ends before the trailing frames".into());
    }
    let blocked = blocked_all[start..end].to_vec();
    let truth = states_all[start..end].to_vec();

    // exactly one episode: a single run of blocked frames
    let runs = blocked.windows(2).filter(|w| !w[0] && w[1]).count() + usize::from(blocked[0]);
    if runs != 1 {
        return Err(format!("{runs} blockage episodes in the window"));
    }
    let max_range = scenario.radar.max_range();
    let max_velocity = scenario.radar.max_velocity();
    for states in &truth {
        if states.len() != scene.objects.len() {
            return Err("object leaves its trajectory inside the window".into());
        }
        for s in states {
            let g = echo_geometry(s);
            if !(g.range > 0.5 && g.range < max_range) || g.radial_velocity.abs() >= max_velocity {
                return Err(format!(
                    "object {} at range {:.2} m / {:.2} m/s is outside the unambiguous region",
                    s.id, g.range, g.radial_velocity
                ));
            }
            if s.id != 0 && blockage_indicator(std::slice::from_ref(s), link) {
                return Err("distractor touches the link".into());
            }
        }
    }

    Ok(Sequence {
        id: index,
        scene,
        start_frame: start as u64,
        blocked,
        truth,
        blocker: archetype.name.clone(),
    })
}
