use serde::{Deserialize, Serialize};

use super::Cluster;
use crate::dsp::{AngleSpectrum, Axis};

/// Polar measurement of one clustered object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectMeasurement {
    /// Range (m).
    pub rho: f64,
    /// Radial velocity (m/s), positive when receding.
    pub v: f64,
    /// Angle from boresight (rad).
    pub theta: f64,
}

/// Range and velocity are the means over the cluster's cells; the angle is
/// the peak of the angle spectra summed over those cells.
///
/// # Panics
/// If the cluster is empty or references bins outside the cube.
pub fn extract_measurement(cluster: &Cluster, cube: &impl AngleSpectrum) -> ObjectMeasurement {
    assert!(!cluster.members.is_empty(), "empty cluster");
    let axes = *cube.axes();
    let n = cluster.members.len() as f64;
    let mut rho = 0.0;
    let mut v = 0.0;
    let mut spectrum = vec![0.0; axes.angle_bins];
    for d in &cluster.members {
        rho += axes.value_at(Axis::Range, d.range_bin as f64);
        v += axes.value_at(Axis::Velocity, d.velocity_bin as f64);
        cube.accumulate_angle_magnitudes(d.range_bin, d.velocity_bin, &mut spectrum);
    }
    let peak = spectrum
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap_or(axes.angle_bins / 2);
    ObjectMeasurement {
        rho: rho / n,
        v: v / n,
        theta: axes.value_at(Axis::Angle, peak as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::Detection;
    use crate::dsp::{radar_cube, FftConfig};
    use crate::sim::{synth_frame, ObjectState, RadarConfig, SynthOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn member(r: usize, v: usize) -> Detection {
        Detection {
            range_bin: r,
            velocity_bin: v,
            magnitude: 1.0,
        }
    }

    fn target(position: [f64; 2], gain: f64) -> ObjectState {
        ObjectState {
            id: 0,
            position,
            velocity: [0.0, 0.0],
            rcs_gain: gain,
            extent: 0.0,
        }
    }

    #[test]
    fn single_cell_at_boresight() {
        let radar = RadarConfig::default();
        let fft = FftConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let frame = synth_frame(
            &[target([15.0, 0.0], 1.0)],
            &radar,
            &SynthOptions::default(),
            0,
            &mut rng,
        )
        .unwrap();
        let cube = radar_cube(&frame, &radar, &fft).unwrap();
        let m = extract_measurement(
            &Cluster {
                id: 0,
                members: vec![member(85, 64)],
            },
            &cube,
        );
        assert!((m.rho - cube.axes.range_resolution * 85.0).abs() < 1e-12);
        assert_eq!(m.v, 0.0);
        assert_eq!(m.theta, 0.0);
    }

    #[test]
    fn symmetric_pair_averages_range() {
        let radar = RadarConfig::default();
        let fft = FftConfig::default();
        let cube = radar_cube(&crate::sim::RadarFrameCube::zeros(&radar, 0), &radar, &fft).unwrap();
        let m = extract_measurement(
            &Cluster {
                id: 0,
                members: vec![member(84, 64), member(86, 64)],
            },
            &cube,
        );
        assert!((m.rho - 85.0 * cube.axes.range_resolution).abs() < 1e-12);
    }

    #[test]
    fn stronger_target_wins_the_angle() {
        let radar = RadarConfig::default();
        let fft = FftConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // same range (15 m), angles -30 and +20 degrees
        let a = (-30f64).to_radians();
        let b = 20f64.to_radians();
        let objs = [
            target([15.0 * a.cos(), 15.0 * a.sin()], 1.0),
            target([15.0 * b.cos(), 15.0 * b.sin()], 3.0),
        ];
        let frame = synth_frame(&objs, &radar, &SynthOptions::default(), 0, &mut rng).unwrap();
        let cube = radar_cube(&frame, &radar, &fft).unwrap();
        let m = extract_measurement(
            &Cluster {
                id: 0,
                members: vec![member(85, 64)],
            },
            &cube,
        );

        // oracle: per-bin sum over the cluster cells, argmax
        let view = cube.view();
        let best = (0..64)
            .max_by(|&x, &y| {
                view[[x, 85, 64]]
                    .norm()
                    .total_cmp(&view[[y, 85, 64]].norm())
            })
            .unwrap();
        assert_eq!(
            m.theta,
            cube.axes.bin_to_physical(Axis::Angle, best).unwrap()
        );
        let expected_bin = cube.axes.physical_to_bin(Axis::Angle, b);
        assert!(
            (best as f64 - expected_bin).abs() <= 1.0,
            "{best} vs {expected_bin}"
        );
    }
}
