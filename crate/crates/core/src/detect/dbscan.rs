use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::Detection;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DbscanConfig {
    /// Neighborhood radius in scaled bin units.
    pub eps: f64,
    /// Neighbors (including the point itself) needed for a core point.
    pub min_pts: usize,
    pub range_scale: f64,
    pub velocity_scale: f64,
}

impl Default for DbscanConfig {
    fn default() -> Self {
        Self {
            eps: 3.0,
            min_pts: 3,
            range_scale: 1.0,
            velocity_scale: 1.0,
        }
    }
}

impl DbscanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.range_scale > 0.0 && self.velocity_scale > 0.0) {
            return Err(Error::InvalidConfig(
                "DBSCAN eps and scales must be > 0".into(),
            ));
        }
        if self.min_pts < 1 {
            return Err(Error::InvalidConfig("DBSCAN min_pts must be >= 1".into()));
        }
        Ok(())
    }
}

/// A group of detections believed to come from one object.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub id: usize,
    pub members: Vec<Detection>,
}

/// DBSCAN over 2D points; returns a cluster id per point, `None` for noise.
///
/// Points are visited in lexicographic `(x, y)` order (row-major for bin
/// coordinates), ties by input index, whatever order they were passed in.
/// Clusters are numbered in the order they are discovered, and a border
/// point reachable from several clusters joins the first one discovered.
pub fn dbscan(points: &[[f64; 2]], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        points[a][0]
            .total_cmp(&points[b][0])
            .then(points[a][1].total_cmp(&points[b][1]))
            .then(a.cmp(&b))
    });
    let sorted: Vec<[f64; 2]> = order.iter().map(|&i| points[i]).collect();

    // Sorted by x, so each neighborhood is found by sweeping outwards while
    // |dx| <= eps.
    let eps2 = eps * eps;
    let neighbors = |i: usize| -> Vec<usize> {
        let p = sorted[i];
        let mut out = Vec::new();
        let mut lo = i;
        while lo > 0 && p[0] - sorted[lo - 1][0] <= eps {
            lo -= 1;
        }
        let mut j = lo;
        while j < n && sorted[j][0] - p[0] <= eps {
            let dx = sorted[j][0] - p[0];
            let dy = sorted[j][1] - p[1];
            if dx * dx + dy * dy <= eps2 {
                out.push(j);
            }
            j += 1;
        }
        out
    };

    const UNVISITED: usize = usize::MAX;
    const NOISE: usize = usize::MAX - 1;
    let mut label = vec![UNVISITED; n];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for i in 0..n {
        if label[i] != UNVISITED {
            continue;
        }
        let seeds = neighbors(i);
        if seeds.len() < min_pts {
            label[i] = NOISE;
            continue;
        }
        let cluster = next;
        next += 1;
        label[i] = cluster;
        queue.extend(seeds);
        while let Some(q) = queue.pop_front() {
            if label[q] == NOISE {
                label[q] = cluster;
            }
            if label[q] != UNVISITED {
                continue;
            }
            label[q] = cluster;
            let reach = neighbors(q);
            if reach.len() >= min_pts {
                queue.extend(
                    reach
                        .into_iter()
                        .filter(|&r| label[r] == UNVISITED || label[r] == NOISE),
                );
            }
        }
    }

    let mut result = vec![None; n];
    for (s, &orig) in order.iter().enumerate() {
        result[orig] = (label[s] < NOISE).then_some(label[s]);
    }
    result
}

/// Groups CFAR detections by DBSCAN over scaled (range, velocity) bins.
/// Noise detections are dropped.
pub fn cluster_detections(detections: &[Detection], config: &DbscanConfig) -> Vec<Cluster> {
    let points: Vec<[f64; 2]> = detections
        .iter()
        .map(|d| {
            [
                d.range_bin as f64 * config.range_scale,
                d.velocity_bin as f64 * config.velocity_scale,
            ]
        })
        .collect();
    let labels = dbscan(&points, config.eps, config.min_pts);
    let count = labels.iter().flatten().max().map_or(0, |m| m + 1);
    let mut clusters: Vec<Cluster> = (0..count)
        .map(|id| Cluster {
            id,
            members: Vec::new(),
        })
        .collect();
    for (det, label) in detections.iter().zip(labels) {
        if let Some(c) = label {
            clusters[c].members.push(*det);
        }
    }
    clusters
}
