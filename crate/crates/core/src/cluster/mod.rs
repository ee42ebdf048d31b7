//! Density-based clustering with noise labelling, and one-dimensional
//! k-means on a deterministic equidistant centroid line.

mod dbscan;
mod kmeans;

pub use dbscan::{dbscan, DbscanParams, DbscanResult, NOISE};
pub use kmeans::{
    kmeans1d_assign, make_centroid_line, nearest_centroid, CentroidLine, ClusterAssignment,
    KmeansMode,
};

/// Rescales values to `[0, 1]`. A constant column maps to all zeros.
pub fn minmax_scale(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|&v| (v - lo) / span).collect()
}
