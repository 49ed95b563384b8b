use serde::{Deserialize, Serialize};

use super::split::Split;
use crate::{Error, Result};

/// OR of `blocked[t+1..=t+t_p]`, or `None` when that window runs past the
/// end of the series.
pub fn future_label(blocked: &[bool], t: usize, t_p: usize) -> Option<bool> {
    let end = t.checked_add(t_p)?;
    if end >= blocked.len() {
        return None;
    }
    Some(blocked[t + 1..=end].iter().any(|b| *b))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelConfig {
    /// Observation window (frames) of the map-window exports; the first
    /// sample of every sequence is frame `t_o - 1`.
    pub t_o: usize,
    /// Largest prediction window in use. Samples are restricted to frames
    /// whose label exists for every `t_p <= horizon`, so all horizons share
    /// one sample set.
    pub horizon: usize,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            t_o: 8,
            horizon: 10,
        }
    }
}

impl LabelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_o < 1 || self.horizon < 1 {
            return Err(Error::InvalidConfig("t_o and horizon must be >= 1".into()));
        }
        Ok(())
    }

    pub fn check_t_p(&self, t_p: usize) -> Result<()> {
        if t_p < 1 || t_p > self.horizon {
            return Err(Error::InvalidConfig(format!(
                "t_p = {t_p} is outside 1..={}",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// Sample frame indices of a sequence of length `len`.
pub fn sample_frames(len: usize, cfg: &LabelConfig) -> std::ops::Range<usize> {
    let first = cfg.t_o - 1;
    let end = len.saturating_sub(cfg.horizon);
    first..end.max(first)
}

/// One supervised example.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: bool,
    pub sequence: usize,
    pub frame: usize,
    pub split: Split,
}
