//! Range, Doppler and angle FFTs.
//!
//! The forward transforms are unnormalized. Doppler and angle outputs are
//! fftshifted so zero velocity and boresight sit at bin `N/2`; range bins are
//! left in natural order (bin 0 is zero range). Internally the cube is stored
//! range-major with the angle axis contiguous; [`RadarCube::view`] presents
//! the conventional `angle x range x doppler` order.

use std::sync::Arc;

use ndarray::{Array2, Array3, ArrayView3};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::sim::{RadarConfig, RadarFrameCube};
use crate::{Error, Result, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann if len <= 1 => vec![1.0; len],
            Window::Hann => (0..len)
                .map(|n| 0.5 * (1.0 - (std::f64::consts::TAU * n as f64 / (len - 1) as f64).cos()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FftConfig {
    pub range_fft: usize,
    pub doppler_fft: usize,
    pub angle_fft: usize,
    pub range_window: Window,
    pub doppler_window: Window,
    pub angle_window: Window,
}

impl Default for FftConfig {
    fn default() -> Self {
        Self {
            range_fft: 256,
            doppler_fft: 128,
            angle_fft: 64,
            range_window: Window::Rectangular,
            doppler_window: Window::Rectangular,
            angle_window: Window::Rectangular,
        }
    }
}

impl FftConfig {
    pub fn validate(&self, radar: &RadarConfig) -> Result<()> {
        for (name, size, min) in [
            ("range_fft", self.range_fft, radar.samples),
            ("doppler_fft", self.doppler_fft, radar.chirps),
            ("angle_fft", self.angle_fft, radar.rx_antennas),
        ] {
            if !size.is_power_of_two() {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {size} is not a power of two"
                )));
            }
            if size < min {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {size} is smaller than the {min} input samples"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Range,
    Velocity,
    Angle,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::Range => "range",
            Axis::Velocity => "velocity",
            Axis::Angle => "angle",
        }
    }
}

/// Maps cube bins to physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisMap {
    pub range_bins: usize,
    pub doppler_bins: usize,
    pub angle_bins: usize,
    /// Metres per range bin, `c f_s / (2 mu N_S)`.
    pub range_resolution: f64,
    /// m/s per Doppler bin, `lambda / (2 N_L (tau_c + tau_s))`.
    pub velocity_resolution: f64,
    pub antenna_spacing: f64,
}

impl AxisMap {
    pub fn new(radar: &RadarConfig, fft: &FftConfig) -> Self {
        Self {
            range_bins: fft.range_fft,
            doppler_bins: fft.doppler_fft,
            angle_bins: fft.angle_fft,
            range_resolution: SPEED_OF_LIGHT * radar.sample_rate_hz
                / (2.0 * radar.slope_hz_per_s * fft.range_fft as f64),
            velocity_resolution: radar.wavelength()
                / (2.0 * fft.doppler_fft as f64 * radar.chirp_period()),
            antenna_spacing: radar.antenna_spacing,
        }
    }

    pub fn len(&self, axis: Axis) -> usize {
        match axis {
            Axis::Range => self.range_bins,
            Axis::Velocity => self.doppler_bins,
            Axis::Angle => self.angle_bins,
        }
    }

    /// Physical value (m, m/s or rad) of an integer bin.
    pub fn bin_to_physical(&self, axis: Axis, bin: usize) -> Result<f64> {
        let len = self.len(axis);
        if bin >= len {
            return Err(Error::BinOutOfRange {
                axis: axis.name(),
                bin,
                len,
            });
        }
        Ok(self.value_at(axis, bin as f64))
    }

    /// Physical value at a fractional bin position (no bounds check).
    pub fn value_at(&self, axis: Axis, bin: f64) -> f64 {
        match axis {
            Axis::Range => bin * self.range_resolution,
            Axis::Velocity => (bin - (self.doppler_bins / 2) as f64) * self.velocity_resolution,
            Axis::Angle => {
                let n = self.angle_bins as f64;
                let s = (bin - (self.angle_bins / 2) as f64) / (n * self.antenna_spacing);
                s.clamp(-1.0, 1.0).asin()
            }
        }
    }

    /// Fractional bin position of a physical value; inverse of [`Self::value_at`].
    pub fn physical_to_bin(&self, axis: Axis, value: f64) -> f64 {
        match axis {
            Axis::Range => value / self.range_resolution,
            Axis::Velocity => value / self.velocity_resolution + (self.doppler_bins / 2) as f64,
            Axis::Angle => {
                value.sin() * self.angle_bins as f64 * self.antenna_spacing
                    + (self.angle_bins / 2) as f64
            }
        }
    }
}

/// Frame after the range and Doppler FFTs, before the angle FFT.
/// Stored `range x doppler x antenna`.
#[derive(Debug, Clone)]
pub struct RangeDopplerCube {
    pub data: Array3<Complex64>,
    pub axes: AxisMap,
}

/// Full radar cube; stored `range x doppler x angle`.
#[derive(Debug, Clone)]
pub struct RadarCube {
    data: Array3<Complex64>,
    pub axes: AxisMap,
}

impl RadarCube {
    /// Conventional `angle x range x doppler` view.
    pub fn view(&self) -> ArrayView3<'_, Complex64> {
        self.data.view().permuted_axes([2, 0, 1])
    }

    pub fn get(&self, angle: usize, range: usize, doppler: usize) -> Complex64 {
        self.data[[range, doppler, angle]]
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Magnitude map over range x doppler (`N_S x N_L`).
#[derive(Debug, Clone, PartialEq)]
pub struct RangeVelocityMap {
    pub data: Array2<f64>,
    pub axes: AxisMap,
}

/// Magnitude map over range x angle (`N_S x N_M`).
#[derive(Debug, Clone, PartialEq)]
pub struct RangeAngleMap {
    pub data: Array2<f64>,
    pub axes: AxisMap,
}

/// Anything that can produce the angle spectrum of a range-doppler cell.
pub trait AngleSpectrum {
    fn axes(&self) -> &AxisMap;
    /// Adds `|cube[a, range, doppler]|` to `acc[a]` for every angle bin.
    fn accumulate_angle_magnitudes(&self, range: usize, doppler: usize, acc: &mut [f64]);
}

impl AngleSpectrum for RadarCube {
    fn axes(&self) -> &AxisMap {
        &self.axes
    }

    fn accumulate_angle_magnitudes(&self, range: usize, doppler: usize, acc: &mut [f64]) {
        for (a, c) in acc
            .iter_mut()
            .zip(self.data.slice(ndarray::s![range, doppler, ..]))
        {
            *a += c.norm();
        }
    }
}

/// Reusable FFT plans and windows for one radar/FFT configuration.
pub struct MapProcessor {
    radar: RadarConfig,
    config: FftConfig,
    axes: AxisMap,
    range_plan: Arc<dyn Fft<f64>>,
    doppler_plan: Arc<dyn Fft<f64>>,
    angle_plan: Arc<dyn Fft<f64>>,
    range_window: Vec<f64>,
    doppler_window: Vec<f64>,
    angle_window: Vec<f64>,
}

impl std::fmt::Debug for MapProcessor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MapProcessor")
            .field("config", &self.config)
            .field("axes", &self.axes)
            .finish()
    }
}

fn fftshift_into(src: &[Complex64], dst: &mut [Complex64]) {
    let half = src.len() / 2;
    dst[..src.len() - half].copy_from_slice(&src[half..]);
    dst[src.len() - half..].copy_from_slice(&src[..half]);
}

impl MapProcessor {
    pub fn new(radar: &RadarConfig, config: &FftConfig) -> Result<Self> {
        radar.validate()?;
        config.validate(radar)?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            radar: radar.clone(),
            config: config.clone(),
            axes: AxisMap::new(radar, config),
            range_plan: planner.plan_fft_forward(config.range_fft),
            doppler_plan: planner.plan_fft_forward(config.doppler_fft),
            angle_plan: planner.plan_fft_forward(config.angle_fft),
            range_window: config.range_window.coefficients(radar.samples),
            doppler_window: config.doppler_window.coefficients(radar.chirps),
            angle_window: config.angle_window.coefficients(radar.rx_antennas),
        })
    }

    pub fn axes(&self) -> &AxisMap {
        &self.axes
    }

    pub fn radar(&self) -> &RadarConfig {
        &self.radar
    }

    pub fn fft_config(&self) -> &FftConfig {
        &self.config
    }

    /// Range FFT over samples then Doppler FFT over chirps, per antenna.
    pub fn range_doppler(&self, frame: &RadarFrameCube) -> Result<RangeDopplerCube> {
        frame.check_shape(&self.radar)?;
        let (n_ant, n_samp, n_chirp) = frame.samples.dim();
        let (ns, nl) = (self.config.range_fft, self.config.doppler_fft);
        let zero = Complex64::new(0.0, 0.0);

        // antenna x range bin x chirp
        let mut after_range = Array3::<Complex64>::zeros((n_ant, ns, n_chirp));
        let mut buf = vec![zero; ns];
        let mut scratch = vec![zero; self.range_plan.get_inplace_scratch_len()];
        for m in 0..n_ant {
            for l in 0..n_chirp {
                for (n, b) in buf.iter_mut().enumerate() {
                    *b = if n < n_samp {
                        frame.samples[[m, n, l]] * self.range_window[n]
                    } else {
                        zero
                    };
                }
                self.range_plan.process_with_scratch(&mut buf, &mut scratch);
                for (k, v) in buf.iter().enumerate() {
                    after_range[[m, k, l]] = *v;
                }
            }
        }

        let mut data = Array3::<Complex64>::zeros((ns, nl, n_ant));
        let mut buf = vec![zero; nl];
        let mut shifted = vec![zero; nl];
        let mut scratch = vec![zero; self.doppler_plan.get_inplace_scratch_len()];
        for m in 0..n_ant {
            for k in 0..ns {
                let lane = after_range.slice(ndarray::s![m, k, ..]);
                for (l, b) in buf.iter_mut().enumerate() {
                    *b = if l < n_chirp {
                        lane[l] * self.doppler_window[l]
                    } else {
                        zero
                    };
                }
                self.doppler_plan
                    .process_with_scratch(&mut buf, &mut scratch);
                fftshift_into(&buf, &mut shifted);
                for (d, v) in shifted.iter().enumerate() {
                    data[[k, d, m]] = *v;
                }
            }
        }
        Ok(RangeDopplerCube {
            data,
            axes: self.axes,
        })
    }

    /// Zero-padded, shifted angle FFT of one range-doppler cell.
    pub fn angle_fft_cell(
        &self,
        rd: &RangeDopplerCube,
        range: usize,
        doppler: usize,
        buf: &mut [Complex64],
        out: &mut [Complex64],
        scratch: &mut [Complex64],
    ) {
        let n_ant = rd.data.dim().2;
        buf.fill(Complex64::new(0.0, 0.0));
        for (m, b) in buf.iter_mut().enumerate().take(n_ant) {
            *b = rd.data[[range, doppler, m]] * self.angle_window[m];
        }
        self.angle_plan.process_with_scratch(buf, scratch);
        fftshift_into(buf, out);
    }

    fn angle_buffers(&self) -> [Vec<Complex64>; 3] {
        let zero = Complex64::new(0.0, 0.0);
        [
            vec![zero; self.config.angle_fft],
            vec![zero; self.config.angle_fft],
            vec![zero; self.angle_plan.get_inplace_scratch_len()],
        ]
    }

    pub fn radar_cube(&self, frame: &RadarFrameCube) -> Result<RadarCube> {
        let rd = self.range_doppler(frame)?;
        Ok(self.cube_from_range_doppler(&rd))
    }

    pub fn cube_from_range_doppler(&self, rd: &RangeDopplerCube) -> RadarCube {
        let (ns, nl, nm) = (
            self.config.range_fft,
            self.config.doppler_fft,
            self.config.angle_fft,
        );
        let mut data = Array3::<Complex64>::zeros((ns, nl, nm));
        let [mut buf, mut out, mut scratch] = self.angle_buffers();
        for k in 0..ns {
            for d in 0..nl {
                self.angle_fft_cell(rd, k, d, &mut buf, &mut out, &mut scratch);
                data.slice_mut(ndarray::s![k, d, ..])
                    .iter_mut()
                    .zip(&out)
                    .for_each(|(dst, v)| *dst = *v);
            }
        }
        RadarCube {
            data,
            axes: self.axes,
        }
    }

    /// Range-velocity map straight from the range-doppler stage, computing
    /// each cell's angle spectrum on the fly instead of materializing the cube.
    pub fn range_velocity_map_fast(&self, rd: &RangeDopplerCube) -> RangeVelocityMap {
        let (ns, nl) = (self.config.range_fft, self.config.doppler_fft);
        let mut data = Array2::<f64>::zeros((ns, nl));
        let [mut buf, mut out, mut scratch] = self.angle_buffers();
        for k in 0..ns {
            for d in 0..nl {
                self.angle_fft_cell(rd, k, d, &mut buf, &mut out, &mut scratch);
                data[[k, d]] = out.iter().map(|c| c.norm()).sum();
            }
        }
        RangeVelocityMap {
            data,
            axes: self.axes,
        }
    }

    /// Pairs the processor with a range-doppler cube as an [`AngleSpectrum`].
    pub fn angle_source<'a>(&'a self, rd: &'a RangeDopplerCube) -> LazyAngleSpectrum<'a> {
        LazyAngleSpectrum {
            processor: self,
            rd,
        }
    }
}

/// Angle spectra computed on demand from a [`RangeDopplerCube`].
pub struct LazyAngleSpectrum<'a> {
    processor: &'a MapProcessor,
    rd: &'a RangeDopplerCube,
}

impl AngleSpectrum for LazyAngleSpectrum<'_> {
    fn axes(&self) -> &AxisMap {
        &self.rd.axes
    }

    fn accumulate_angle_magnitudes(&self, range: usize, doppler: usize, acc: &mut [f64]) {
        let [mut buf, mut out, mut scratch] = self.processor.angle_buffers();
        self.processor
            .angle_fft_cell(self.rd, range, doppler, &mut buf, &mut out, &mut scratch);
        for (a, c) in acc.iter_mut().zip(&out) {
            *a += c.norm();
        }
    }
}

/// 3D FFT of a frame with zero padding to the configured sizes.
pub fn radar_cube(
    frame: &RadarFrameCube,
    radar: &RadarConfig,
    fft: &FftConfig,
) -> Result<RadarCube> {
    MapProcessor::new(radar, fft)?.radar_cube(frame)
}

/// Sum of `|cube|` over the angle axis.
pub fn range_velocity_map(cube: &RadarCube) -> RangeVelocityMap {
    let data = cube
        .data
        .map_axis(ndarray::Axis(2), |lane| lane.iter().map(|c| c.norm()).sum());
    RangeVelocityMap {
        data,
        axes: cube.axes,
    }
}

/// Sum of `|cube|` over the Doppler axis, oriented range x angle.
pub fn range_angle_map(cube: &RadarCube) -> RangeAngleMap {
    let data = cube
        .data
        .map_axis(ndarray::Axis(1), |lane| lane.iter().map(|c| c.norm()).sum());
    RangeAngleMap {
        data,
        axes: cube.axes,
    }
}
