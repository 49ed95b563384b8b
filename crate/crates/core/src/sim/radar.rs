use serde::{Deserialize, Serialize};

use crate::{Error, Result, SPEED_OF_LIGHT};

/// Chirp, frame and receive-array parameters of the FMCW radar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarConfig {
    /// Chirp start frequency (Hz).
    pub carrier_hz: f64,
    /// Swept bandwidth (Hz).
    pub bandwidth_hz: f64,
    /// Chirp slope (Hz/s); must equal `bandwidth_hz / chirp_s`.
    pub slope_hz_per_s: f64,
    /// Chirp duration (s).
    pub chirp_s: f64,
    /// Idle time between chirps (s).
    pub idle_s: f64,
    /// Frame period (s).
    pub frame_s: f64,
    /// Chirps per frame.
    pub chirps: usize,
    /// ADC samples per chirp.
    pub samples: usize,
    /// Receive antennas.
    pub rx_antennas: usize,
    /// ADC sample rate (Hz).
    pub sample_rate_hz: f64,
    /// Receive element spacing in wavelengths.
    pub antenna_spacing: f64,
}

impl Default for RadarConfig {
    fn default() -> Self {
        let slope = 15e6 / 1e-6;
        // 45 m maximum range for a complex-baseband ADC.
        let max_range = 45.0;
        Self {
            carrier_hz: 77e9,
            bandwidth_hz: 750e6,
            slope_hz_per_s: slope,
            chirp_s: 50e-6,
            idle_s: 12e-6,
            frame_s: 1.0 / 9.0,
            chirps: 128,
            samples: 256,
            rx_antennas: 4,
            sample_rate_hz: 2.0 * slope * max_range / 3e8,
            antenna_spacing: 0.5,
        }
    }
}

impl RadarConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Chirp repetition interval `chirp_s + idle_s`.
    pub fn chirp_period(&self) -> f64 {
        self.chirp_s + self.idle_s
    }

    /// Largest range whose beat frequency stays below the ADC sample rate.
    pub fn max_range(&self) -> f64 {
        self.sample_rate_hz * SPEED_OF_LIGHT / (2.0 * self.slope_hz_per_s)
    }

    /// Largest radial speed whose chirp-to-chirp phase step stays within ±π.
    pub fn max_velocity(&self) -> f64 {
        self.wavelength() / (4.0 * self.chirp_period())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("slope_hz_per_s", self.slope_hz_per_s),
            ("chirp_s", self.chirp_s),
            ("idle_s", self.idle_s),
            ("frame_s", self.frame_s),
            ("sample_rate_hz", self.sample_rate_hz),
            ("antenna_spacing", self.antenna_spacing),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "radar.{name} must be positive, got {value}"
                )));
            }
        }
        for (name, value) in [
            ("chirps", self.chirps),
            ("samples", self.samples),
            ("rx_antennas", self.rx_antennas),
        ] {
            if value == 0 {
                return Err(Error::InvalidConfig(format!(
                    "radar.{name} must be positive"
                )));
            }
        }
        let implied = self.bandwidth_hz / self.chirp_s;
        if ((self.slope_hz_per_s - implied) / implied).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "radar.slope_hz_per_s {} != bandwidth/chirp duration {}",
                self.slope_hz_per_s, implied
            )));
        }
        // Sampling may run past the end of the sweep into the idle time (the
        // default 256 samples at 4.5 MHz take 56.9 us against a 50 us chirp),
        // but never into the next chirp.
        let sampling = self.samples as f64 / self.sample_rate_hz;
        if sampling > self.chirp_period() * (1.0 + 1e-9) {
            return Err(Error::InvalidConfig(format!(
                "ADC window {sampling:e} s exceeds chirp period {:e} s",
                self.chirp_period()
            )));
        }
        let active = self.chirps as f64 * self.chirp_period();
        if active > self.frame_s * (1.0 + 1e-9) {
            return Err(Error::InvalidConfig(format!(
                "{} chirps take {active:e} s, longer than the frame period {:e} s",
                self.chirps, self.frame_s
            )));
        }
        Ok(())
    }
}
