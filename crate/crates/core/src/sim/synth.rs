use std::f64::consts::TAU;

use ndarray::Array3;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ObjectState, RadarConfig};
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Raw ADC samples of one frame, shaped `rx_antennas x samples x chirps`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarFrameCube {
    pub samples: Array3<Complex64>,
    /// Frame index the samples were taken at.
    pub frame: u64,
}

impl RadarFrameCube {
    pub fn zeros(radar: &RadarConfig, frame: u64) -> Self {
        Self {
            samples: Array3::zeros((radar.rx_antennas, radar.samples, radar.chirps)),
            frame,
        }
    }

    pub fn check_shape(&self, radar: &RadarConfig) -> Result<()> {
        let expected = (radar.rx_antennas, radar.samples, radar.chirps);
        if self.samples.dim() != expected {
            return Err(Error::ShapeMismatch {
                expected: format!("{expected:?}"),
                actual: format!("{:?}", self.samples.dim()),
            });
        }
        Ok(())
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|c| c.norm_sqr()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthOptions {
    /// Standard deviation of each complex noise sample (each of I and Q
    /// carries half the variance).
    pub noise_sigma: f64,
    /// Scale echo amplitudes by `1/d^2` (two-way spreading, amplitude domain).
    pub path_loss: bool,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            noise_sigma: 0.0,
            path_loss: false,
        }
    }
}

/// Polar view of an object from the radar at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoGeometry {
    pub range: f64,
    /// Positive when the object is receding.
    pub radial_velocity: f64,
    /// `atan2(y, x)` from boresight.
    pub angle: f64,
}

pub fn echo_geometry(state: &ObjectState) -> EchoGeometry {
    let [x, y] = state.position;
    let [vx, vy] = state.velocity;
    let range = x.hypot(y);
    let radial_velocity = if range > 0.0 {
        (x * vx + y * vy) / range
    } else {
        0.0
    };
    EchoGeometry {
        range,
        radial_velocity,
        angle: y.atan2(x),
    }
}

/// Synthesizes the IF samples of one frame.
///
/// Each object contributes
/// `a exp(j 2pi [mu tau n / f_s + f_c tau - mu tau^2 / 2]) exp(j 2pi m d sin(theta))`
/// with the round-trip delay `tau = 2 (d + v_r l T_chirp) / c` recomputed per
/// chirp `l` (stop-and-hop within a chirp). Complex Gaussian noise with
/// standard deviation `noise_sigma` is added to every sample.
pub fn synth_frame<R: Rng + ?Sized>(
    states: &[ObjectState],
    radar: &RadarConfig,
    options: &SynthOptions,
    frame: u64,
    rng: &mut R,
) -> Result<RadarFrameCube> {
    let max_range = radar.max_range();
    let max_velocity = radar.max_velocity();
    let geometry: Vec<EchoGeometry> = states
        .iter()
        .map(|s| {
            let g = echo_geometry(s);
            if !(g.range > 0.0 && g.range < max_range) {
                return Err(Error::Ambiguity {
                    id: s.id,
                    reason: format!("range {:.3} m not in (0, {max_range:.3}) m", g.range),
                });
            }
            if g.radial_velocity.abs() >= max_velocity {
                return Err(Error::Ambiguity {
                    id: s.id,
                    reason: format!(
                        "radial velocity {:.3} m/s exceeds +-{max_velocity:.3} m/s",
                        g.radial_velocity
                    ),
                });
            }
            Ok(g)
        })
        .collect::<Result<_>>()?;

    let mut cube = RadarFrameCube::zeros(radar, frame);
    let period = radar.chirp_period();
    let (n_ant, n_samp, n_chirp) = cube.samples.dim();
    for (state, g) in states.iter().zip(&geometry) {
        let amplitude = if options.path_loss {
            state.rcs_gain / (g.range * g.range)
        } else {
            state.rcs_gain
        };
        let antenna_step = TAU * radar.antenna_spacing * g.angle.sin();
        for l in 0..n_chirp {
            let d = g.range + g.radial_velocity * l as f64 * period;
            let tau = 2.0 * d / SPEED_OF_LIGHT;
            // Phase in cycles; keep the fractional part so the ~1e4-cycle
            // carrier term does not eat the mantissa.
            let cycles = radar.carrier_hz * tau - 0.5 * radar.slope_hz_per_s * tau * tau;
            let sample_step =
                Complex64::from_polar(1.0, TAU * radar.slope_hz_per_s * tau / radar.sample_rate_hz);
            for m in 0..n_ant {
                let phase = TAU * cycles.fract() + antenna_step * m as f64;
                let mut value = Complex64::from_polar(amplitude, phase);
                for n in 0..n_samp {
                    cube.samples[[m, n, l]] += value;
                    value *= sample_step;
                }
            }
        }
    }

    if options.noise_sigma > 0.0 {
        let scale = options.noise_sigma / std::f64::consts::SQRT_2;
        for c in cube.samples.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *c += Complex64::new(re * scale, im * scale);
        }
    }
    Ok(cube)
}
