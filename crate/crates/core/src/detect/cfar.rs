use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Two-dimensional cell-averaging CFAR window.
///
/// `train` counts training cells beyond the guard band on each side, so the
/// full window spans `2 (train + guard) + 1` cells per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CfarConfig {
    /// (range, velocity) training half-widths.
    pub train: [usize; 2],
    /// (range, velocity) guard half-widths.
    pub guard: [usize; 2],
    /// Threshold multiplier on the training mean.
    pub alpha: f64,
}

impl Default for CfarConfig {
    fn default() -> Self {
        let mut cfg = Self {
            train: [8, 4],
            guard: [2, 2],
            alpha: 1.0,
        };
        cfg.alpha = Self::alpha_for_pfa(1e-3, cfg.training_cells());
        cfg
    }
}

impl CfarConfig {
    /// Threshold multiplier giving false-alarm probability `pfa` for
    /// square-law (exponential) noise with `n` training cells.
    pub fn alpha_for_pfa(pfa: f64, n: usize) -> f64 {
        let n = n as f64;
        n * (pfa.powf(-1.0 / n) - 1.0)
    }

    /// Training cells of a window that fits entirely inside the map.
    pub fn training_cells(&self) -> usize {
        let outer =
            (2 * (self.train[0] + self.guard[0]) + 1) * (2 * (self.train[1] + self.guard[1]) + 1);
        let inner = (2 * self.guard[0] + 1) * (2 * self.guard[1] + 1);
        outer - inner
    }

    pub fn validate(&self) -> Result<()> {
        if self.train[0] <= self.guard[0] || self.train[1] <= self.guard[1] {
            return Err(Error::InvalidConfig(format!(
                "CFAR training half-widths {:?} must exceed guard half-widths {:?}",
                self.train, self.guard
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "CFAR alpha must be > 0, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub range_bin: usize,
    pub velocity_bin: usize,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfarOutput {
    pub mask: Array2<bool>,
    /// Detections in row-major (range, then velocity) order.
    pub detections: Vec<Detection>,
}

/// Cell-averaging CFAR over a range x velocity map.
///
/// A cell is detected when its value exceeds `alpha` times the mean of the
/// training ring around it. Near the map edges the ring is truncated and the
/// mean is taken over the cells that exist.
pub fn cfar_2d(map: &Array2<f64>, config: &CfarConfig) -> Result<CfarOutput> {
    config.validate()?;
    let (rows, cols) = map.dim();
    let half = [
        config.train[0] + config.guard[0],
        config.train[1] + config.guard[1],
    ];
    if rows < 2 * half[0] + 1 || cols < 2 * half[1] + 1 {
        return Err(Error::InvalidConfig(format!(
            "CFAR window {}x{} does not fit a {rows}x{cols} map",
            2 * half[0] + 1,
            2 * half[1] + 1
        )));
    }

    // summed-area table with a zero border row/column
    let mut sat = Array2::<f64>::zeros((rows + 1, cols + 1));
    for i in 0..rows {
        let mut row_sum = 0.0;
        for j in 0..cols {
            row_sum += map[[i, j]];
            sat[[i + 1, j + 1]] = sat[[i, j + 1]] + row_sum;
        }
    }
    let rect = |r0: usize, r1: usize, c0: usize, c1: usize| {
        // inclusive-exclusive [r0, r1) x [c0, c1)
        sat[[r1, c1]] - sat[[r0, c1]] - sat[[r1, c0]] + sat[[r0, c0]]
    };
    let span =
        |center: usize, h: usize, len: usize| (center.saturating_sub(h), (center + h + 1).min(len));

    let mut mask = Array2::from_elem((rows, cols), false);
    let mut detections = Vec::new();
    for i in 0..rows {
        let (or0, or1) = span(i, half[0], rows);
        let (gr0, gr1) = span(i, config.guard[0], rows);
        for j in 0..cols {
            let (oc0, oc1) = span(j, half[1], cols);
            let (gc0, gc1) = span(j, config.guard[1], cols);
            let count = (or1 - or0) * (oc1 - oc0) - (gr1 - gr0) * (gc1 - gc0);
            let sum = rect(or0, or1, oc0, oc1) - rect(gr0, gr1, gc0, gc1);
            let mean = sum / count as f64;
            let value = map[[i, j]];
            if value > config.alpha * mean {
                mask[[i, j]] = true;
                detections.push(Detection {
                    range_bin: i,
                    velocity_bin: j,
                    magnitude: value,
                });
            }
        }
    }
    Ok(CfarOutput { mask, detections })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_map_has_no_detections() {
        let map = Array2::from_elem((40, 30), 3.0);
        let cfg = CfarConfig {
            alpha: 1.5,
            ..CfarConfig::default()
        };
        assert!(cfar_2d(&map, &cfg).unwrap().detections.is_empty());
    }

    #[test]
    fn lone_spike_is_detected() {
        let mut map = Array2::zeros((64, 32));
        map[[20, 10]] = 100.0;
        let out = cfar_2d(&map, &CfarConfig::default()).unwrap();
        assert_eq!(out.detections.len(), 1);
        assert_eq!(
            (out.detections[0].range_bin, out.detections[0].velocity_bin),
            (20, 10)
        );
        assert!(out.mask[[20, 10]]);
    }

    #[test]
    fn window_must_fit() {
        let map = Array2::zeros((10, 100));
        assert!(matches!(
            cfar_2d(&map, &CfarConfig::default()),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn guard_must_be_smaller_than_train() {
        let mut cfg = CfarConfig {
            train: [2, 2],
            guard: [2, 1],
            alpha: 3.0,
        };
        assert!(cfg.validate().is_err());
        cfg.train = [3, 2];
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.training_cells(), 11 * 7 - 5 * 3);
        cfg.alpha = f64::NAN;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn default_alpha_matches_pfa_relation() {
        let cfg = CfarConfig::default();
        assert_eq!(cfg.training_cells(), 21 * 13 - 25);
        let n = cfg.training_cells() as f64;
        let pfa = (1.0 + cfg.alpha / n).powf(-n);
        assert!((pfa - 1e-3).abs() < 1e-12);
    }
}
