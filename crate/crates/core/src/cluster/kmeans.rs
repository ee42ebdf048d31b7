use log::warn;

use crate::error::{Error, Result};

/// Strictly increasing centroid coordinates on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidLine {
    centroids: Vec<f64>,
}

impl CentroidLine {
    pub fn new(centroids: Vec<f64>) -> Result<Self> {
        if centroids.is_empty() {
            return Err(Error::InvalidParameter("centroid line needs k >= 1".into()));
        }
        if centroids.iter().any(|c| !c.is_finite()) || centroids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "centroids must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self { centroids })
    }

    pub fn centroids(&self) -> &[f64] {
        &self.centroids
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    /// 0-based centroid index per data point.
    pub labels: Vec<usize>,
}

impl ClusterAssignment {
    /// Maps each label to its centroid value.
    pub fn centroid_values(&self, line: &CentroidLine) -> Vec<f64> {
        self.labels.iter().map(|&l| line.centroids[l]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KmeansMode {
    /// Centroids stay where they were initialised; one assignment pass.
    #[default]
    Frozen,
    /// Alternating assignment and mean update until labels stop changing.
    Lloyd,
}

/// `k` equidistant centroids spanning `[min, max]` of the finite data.
/// A constant input collapses to a single centroid.
pub fn make_centroid_line(data: &[f64], k: usize) -> Result<CentroidLine> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    let (lo, hi) = data
        .iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return Err(Error::EmptyInput);
    }
    if lo == hi {
        if k > 1 {
            warn!("constant data ({lo}); collapsing {k} centroids to one");
        }
        return CentroidLine::new(vec![lo]);
    }
    if k == 1 {
        return CentroidLine::new(vec![lo + (hi - lo) / 2.0]);
    }
    let step = (hi - lo) / (k - 1) as f64;
    let mut centroids: Vec<f64> = (0..k).map(|j| lo + j as f64 * step).collect();
    centroids[k - 1] = hi;
    CentroidLine::new(centroids)
}

/// Index of the closest centroid; ties go to the lower index.
pub fn nearest_centroid(value: f64, centroids: &[f64]) -> usize {
    // first centroid >= value; the answer is it or its left neighbour
    let hi = centroids.partition_point(|&c| c < value);
    if hi == 0 {
        return 0;
    }
    if hi == centroids.len() {
        return hi - 1;
    }
    if (value - centroids[hi - 1]).abs() <= (centroids[hi] - value).abs() {
        hi - 1
    } else {
        hi
    }
}

fn assign(data: &[f64], centroids: &[f64], labels: &mut [usize]) -> bool {
    let mut changed = false;
    for (label, &v) in labels.iter_mut().zip(data) {
        let l = nearest_centroid(v, centroids);
        changed |= *label != l;
        *label = l;
    }
    changed
}

/// Assigns every point to its nearest centroid. In [`KmeansMode::Lloyd`]
/// the centroids are then re-estimated until two consecutive passes agree or
/// `max_iters` is reached; an empty cluster keeps its previous centroid.
pub fn kmeans1d_assign(
    data: &[f64],
    line: &CentroidLine,
    max_iters: usize,
    mode: KmeansMode,
) -> Result<(ClusterAssignment, CentroidLine)> {
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    if max_iters == 0 {
        return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
    }
    let mut labels = vec![usize::MAX; data.len()];
    let mut centroids = line.centroids.clone();
    assign(data, &centroids, &mut labels);
    if mode == KmeansMode::Lloyd {
        let k = centroids.len();
        for _ in 1..max_iters {
            let mut sums = vec![0.0; k];
            let mut counts = vec![0usize; k];
            for (&l, &v) in labels.iter().zip(data) {
                sums[l] += v;
                counts[l] += 1;
            }
            for ((c, s), &n) in centroids.iter_mut().zip(sums).zip(&counts) {
                if n > 0 {
                    *c = s / n as f64;
                }
            }
            if !assign(data, &centroids, &mut labels) {
                break;
            }
        }
    }
    Ok((ClusterAssignment { labels }, CentroidLine { centroids }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_nearest(v: f64, cs: &[f64]) -> usize {
        let mut best = 0;
        for (j, c) in cs.iter().enumerate() {
            if (v - c).abs() < (v - cs[best]).abs() {
                best = j;
            }
        }
        best
    }

    #[test]
    fn line_construction() {
        let line = make_centroid_line(&(0..30).map(f64::from).collect::<Vec<_>>(), 30).unwrap();
        assert_eq!(line.centroids(), (0..30).map(f64::from).collect::<Vec<_>>().as_slice());
        assert_eq!(make_centroid_line(&[10.0, 0.0, 4.0], 3).unwrap().centroids(), [0.0, 5.0, 10.0]);
        assert_eq!(make_centroid_line(&[7.0; 4], 5).unwrap().centroids(), [7.0]);
        assert_eq!(make_centroid_line(&[2.0, 4.0], 1).unwrap().centroids(), [3.0]);
        assert_eq!(make_centroid_line(&[f64::NAN, 1.0, 3.0], 2).unwrap().centroids(), [1.0, 3.0]);
        assert!(matches!(make_centroid_line(&[f64::NAN], 2), Err(Error::EmptyInput)));
        assert!(make_centroid_line(&[1.0], 0).is_err());
    }

    #[test]
    fn frozen_assignment_with_ties() {
        let line = CentroidLine::new(vec![0.0, 5.0, 10.0]).unwrap();
        let data: Vec<f64> = (0..=10).map(f64::from).collect();
        let (a, out) = kmeans1d_assign(&data, &line, 10, KmeansMode::Frozen).unwrap();
        assert_eq!(a.labels, [0, 0, 0, 1, 1, 1, 1, 1, 2, 2, 2]);
        assert_eq!(out, line);
        let (a, _) = kmeans1d_assign(&[2.5, 7.5], &line, 1, KmeansMode::Frozen).unwrap();
        assert_eq!(a.labels, [0, 1]);
    }

    #[test]
    fn constant_data() {
        let line = CentroidLine::new(vec![0.0, 5.0, 10.0]).unwrap();
        let (a, _) = kmeans1d_assign(&[6.0; 5], &line, 1, KmeansMode::Frozen).unwrap();
        assert_eq!(a.labels, [1; 5]);
        assert!(matches!(
            kmeans1d_assign(&[], &line, 1, KmeansMode::Frozen),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn lloyd_moves_and_converges() {
        let data = [0.0, 1.0, 2.0, 8.0, 9.0, 10.0];
        let line = make_centroid_line(&data, 2).unwrap();
        let (a, out) = kmeans1d_assign(&data, &line, 100, KmeansMode::Lloyd).unwrap();
        assert_eq!(a.labels, [0, 0, 0, 1, 1, 1]);
        assert_eq!(out.centroids(), [1.0, 9.0]);
    }

    fn wcss(data: &[f64], labels: &[usize], cs: &[f64]) -> f64 {
        data.iter().zip(labels).map(|(v, &l)| (v - cs[l]).powi(2)).sum()
    }

    proptest! {
        #[test]
        fn frozen_matches_linear_scan(
            data in prop::collection::vec(-100.0f64..100.0, 1..200),
            k in 1usize..40,
        ) {
            let line = make_centroid_line(&data, k).unwrap();
            let (a, _) = kmeans1d_assign(&data, &line, 1, KmeansMode::Frozen).unwrap();
            for (v, &l) in data.iter().zip(&a.labels) {
                prop_assert_eq!(l, brute_nearest(*v, line.centroids()));
            }
            let cs = line.centroids();
            let lo = data.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if lo < hi && k > 1 {
                prop_assert!(cs.contains(&lo) && cs.contains(&hi));
                let step = cs[1] - cs[0];
                for w in cs.windows(2) {
                    prop_assert!(((w[1] - w[0]) - step).abs() <= 1e-9 * step.abs().max(1.0));
                }
            }
        }

        #[test]
        fn lloyd_wcss_non_increasing(
            data in prop::collection::vec(-50.0f64..50.0, 2..150),
            k in 1usize..12,
        ) {
            let line = make_centroid_line(&data, k).unwrap();
            let mut prev = f64::INFINITY;
            for iters in 1..8 {
                let (a, out) = kmeans1d_assign(&data, &line, iters, KmeansMode::Lloyd).unwrap();
                let cost = wcss(&data, &a.labels, out.centroids());
                prop_assert!(cost <= prev + 1e-9 * prev.abs().max(1.0));
                prev = cost;
            }
        }
    }
}
