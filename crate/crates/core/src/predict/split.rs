use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Data(format!("unknown split tag {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Train and validation fractions; the test split takes the remainder.
    pub train: f64,
    pub val: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.2,
            seed: 7,
        }
    }
}

/// Minimum number of sequences accepted by [`split_sequences`].
pub const MIN_SEQUENCES: usize = 10;

/// `(train, val, test)` counts: train and validation rounded to the nearest
/// count, test is what remains.
pub fn split_counts(n: usize, cfg: &SplitConfig) -> Result<(usize, usize, usize)> {
    if !(cfg.train > 0.0 && cfg.val >= 0.0 && cfg.train + cfg.val < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "split fractions train={} val={} must leave a test share",
            cfg.train, cfg.val
        )));
    }
    if n < MIN_SEQUENCES {
        return Err(Error::TooFewSequences(n));
    }
    let train = (cfg.train * n as f64).round() as usize;
    let val = (cfg.val * n as f64).round() as usize;
    if train + val >= n {
        return Err(Error::TooFewSequences(n));
    }
    Ok((train, val, n - train - val))
}

/// Seeded sequence-level split; entry `i` is the split of sequence `i`.
pub fn split_sequences(n: usize, cfg: &SplitConfig) -> Result<Vec<Split>> {
    let (train, val, _) = split_counts(n, cfg)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let mut out = vec![Split::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        if rank < train {
            out[i] = Split::Train;
        } else if rank < train + val {
            out[i] = Split::Val;
        }
    }
    Ok(out)
}
