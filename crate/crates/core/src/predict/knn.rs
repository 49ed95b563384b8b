use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnConfig {
    pub k: usize,
    /// Fit a per-dimension z-score on the training set.
    pub standardize: bool,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            k: 5,
            standardize: true,
        }
    }
}

/// Per-dimension affine scaling `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; constant dimensions use 1.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Majority-vote Euclidean k-nearest-neighbour classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    k: usize,
    standardizer: Standardizer,
    /// Training rows after standardization.
    rows: Vec<Vec<f64>>,
    labels: Vec<bool>,
}

impl KnnModel {
    pub fn fit(features: &[Vec<f64>], labels: &[bool], config: &KnnConfig) -> Result<Self> {
        let standardizer = if config.standardize {
            Standardizer::fit(features)
        } else {
            Standardizer::identity(features.first().map_or(0, Vec::len))
        };
        Self::from_parts(config.k, standardizer, features, labels)
    }

    /// Builds a model from raw (unstandardized) rows and a fitted scaler.
    pub fn from_parts(
        k: usize,
        standardizer: Standardizer,
        features: &[Vec<f64>],
        labels: &[bool],
    ) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Data("k-NN training set is empty".into()));
        }
        if features.len() != labels.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} labels", features.len()),
                actual: format!("{} labels", labels.len()),
            });
        }
        if k.is_multiple_of(2) || k > features.len() {
            return Err(Error::InvalidConfig(format!(
                "k must be odd and at most the training size {}, got {k}",
                features.len()
            )));
        }
        let dim = standardizer.mean.len();
        if standardizer.scale.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: standardizer.scale.len(),
            });
        }
        let rows = features
            .iter()
            .map(|r| {
                if r.len() != dim {
                    Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: r.len(),
                    })
                } else {
                    Ok(standardizer.apply(r))
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            k,
            standardizer,
            rows,
            labels: labels.to_vec(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.standardizer.mean.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    /// Training rows recovered in raw units.
    pub fn raw_rows(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| {
                r.iter()
                    .zip(&self.standardizer.mean)
                    .zip(&self.standardizer.scale)
                    .map(|((v, m), s)| v * s + m)
                    .collect()
            })
            .collect()
    }

    /// Indices of the `k` nearest training rows, nearest first; equal
    /// distances go to the lower index.
    pub fn neighbors(&self, query: &[f64]) -> Result<Vec<usize>> {
        if query.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: query.len(),
            });
        }
        let q = self.standardizer.apply(query);
        let mut d: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                (
                    r.iter()
                        .zip(&q)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>(),
                    i,
                )
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_by(cmp);
        Ok(d.into_iter().map(|(_, i)| i).collect())
    }

    /// Fraction of positive labels among the `k` neighbours.
    pub fn predict_proba(&self, query: &[f64]) -> Result<f64> {
        let n = self.neighbors(query)?;
        Ok(n.iter().filter(|&&i| self.labels[i]).count() as f64 / self.k as f64)
    }

    pub fn predict(&self, query: &[f64]) -> Result<bool> {
        Ok(self.predict_proba(query)? > 0.5)
    }
}
