use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Label given to points in low-density regions.
pub const NOISE: isize = -1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbscanParams {
    epsilon: f64,
    min_pts: usize,
}

impl DbscanParams {
    pub fn new(epsilon: f64, min_pts: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be > 0, got {epsilon}")));
        }
        if min_pts == 0 {
            return Err(Error::InvalidParameter("min_pts must be >= 1".into()));
        }
        Ok(Self { epsilon, min_pts })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn min_pts(&self) -> usize {
        self.min_pts
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DbscanResult {
    /// Cluster id in discovery order, or [`NOISE`].
    pub labels: Vec<isize>,
    /// `true` exactly where the label is [`NOISE`].
    pub anomaly_flags: Vec<bool>,
    pub n_clusters: usize,
}

fn within<const D: usize>(a: &[f64; D], b: &[f64; D], eps2: f64) -> bool {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() <= eps2
}

/// Euclidean DBSCAN. A point is core when at least `min_pts` points,
/// itself included, lie within `epsilon`. Points are scanned in input order
/// and a border point reachable from several clusters joins the first one
/// that expands into it.
pub fn dbscan<const D: usize>(points: &[[f64; D]], params: &DbscanParams) -> Result<DbscanResult> {
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let eps2 = params.epsilon * params.epsilon;
    let region = |i: usize| -> Vec<usize> {
        let p = &points[i];
        (0..points.len()).filter(|&j| within(p, &points[j], eps2)).collect()
    };

    let mut labels: Vec<Option<isize>> = vec![None; points.len()];
    let mut next = 0isize;
    let mut queue = VecDeque::new();
    for i in 0..points.len() {
        if labels[i].is_some() {
            continue;
        }
        let neighbors = region(i);
        if neighbors.len() < params.min_pts {
            labels[i] = Some(NOISE);
            continue;
        }
        let cluster = next;
        next += 1;
        labels[i] = Some(cluster);
        queue.extend(neighbors);
        while let Some(q) = queue.pop_front() {
            match labels[q] {
                Some(NOISE) => labels[q] = Some(cluster),
                Some(_) => {}
                None => {
                    labels[q] = Some(cluster);
                    let reach = region(q);
                    if reach.len() >= params.min_pts {
                        queue.extend(reach);
                    }
                }
            }
        }
    }

    let labels: Vec<isize> = labels.into_iter().map(|l| l.unwrap_or(NOISE)).collect();
    let anomaly_flags = labels.iter().map(|&l| l == NOISE).collect();
    Ok(DbscanResult {
        labels,
        anomaly_flags,
        n_clusters: next as usize,
    })
}
