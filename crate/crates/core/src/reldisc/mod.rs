//! Relationship discovery between two periodic features.
//!
//! The independent variable is clustered on an equidistant centroid line,
//! the target is aggregated per cluster (clusters with too few samples become
//! `NaN`), gaps are imputed, and the result is optionally smoothed into a
//! `k`-row lookup table.

mod export;

pub use export::{write_lookup_csv, PlotData, MAX_SCATTER_POINTS};

use std::fmt;
use std::str::FromStr;

use log::warn;

use crate::cluster::{kmeans1d_assign, make_centroid_line, KmeansMode};
use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 30;
pub const DEFAULT_GAMMA: usize = 100;
pub const DEFAULT_SMOOTH_WINDOW: usize = 3;
const LLOYD_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregate {
    Max,
    #[default]
    Average,
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregate::Max => "max",
            Aggregate::Average => "average",
        })
    }
}

impl FromStr for Aggregate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Aggregate::Max),
            "average" | "mean" => Ok(Aggregate::Average),
            _ => Err(Error::InvalidParameter(format!("unknown aggregate `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothing {
    None,
    MovingAverage(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Imputation {
    None,
    ForwardFill,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelDiscParams {
    pub k: usize,
    pub aggregate: Aggregate,
    pub gamma: usize,
    pub smoothing: Smoothing,
    pub imputation: Imputation,
    pub mode: KmeansMode,
}

impl Default for RelDiscParams {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            aggregate: Aggregate::Average,
            gamma: DEFAULT_GAMMA,
            smoothing: Smoothing::MovingAverage(DEFAULT_SMOOTH_WINDOW),
            imputation: Imputation::ForwardFill,
            mode: KmeansMode::Frozen,
        }
    }
}

impl RelDiscParams {
    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        if let Smoothing::MovingAverage(w) = self.smoothing {
            if w == 0 || w % 2 == 0 {
                return Err(Error::InvalidParameter(format!(
                    "smoothing window must be odd and >= 1, got {w}"
                )));
            }
        }
        Ok(())
    }
}

/// Discovered relationship `D = [x, y]` with its smoothed target.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupTable {
    /// Centroids of the independent variable.
    pub x: Vec<f64>,
    /// Aggregated target, `NaN` where a cluster had `<= gamma` samples.
    pub y: Vec<f64>,
    /// `y` after imputation.
    pub y_imputed: Vec<f64>,
    /// `y_imputed` after smoothing.
    pub y_smooth: Vec<f64>,
    pub counts: Vec<usize>,
    /// Upper edge of every cluster's Voronoi cell on the line; the last one
    /// is the largest observed value.
    pub right_edges: Vec<f64>,
}

impl LookupTable {
    pub fn k(&self) -> usize {
        self.x.len()
    }

    /// Clusters that received no samples at all.
    pub fn pigeonholed(&self) -> usize {
        self.counts.iter().filter(|&&c| c == 0).count()
    }
}

/// Per-cluster aggregate, or `NaN` unless more than `gamma` samples exist.
pub fn aggregate_cluster(values: &[f64], mode: Aggregate, gamma: usize) -> f64 {
    if values.len() <= gamma || values.is_empty() {
        return f64::NAN;
    }
    match mode {
        Aggregate::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Aggregate::Average => values.iter().sum::<f64>() / values.len() as f64,
    }
}

/// Replaces each `NaN` with the last preceding value; a leading gap takes
/// the first available value.
pub fn impute(y: &[f64], mode: Imputation) -> Vec<f64> {
    if mode == Imputation::None {
        return y.to_vec();
    }
    let Some(first) = y.iter().copied().find(|v| !v.is_nan()) else {
        if !y.is_empty() {
            warn!("nothing to impute from: every cluster is NaN");
        }
        return y.to_vec();
    };
    let mut last = first;
    y.iter()
        .map(|&v| {
            if !v.is_nan() {
                last = v;
            }
            last
        })
        .collect()
}

/// Centred moving average; windows are truncated at the edges. `NaN`
/// entries are skipped within a window.
pub fn smooth(y: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "smoothing window must be odd and >= 1, got {window}"
        )));
    }
    let half = window / 2;
    Ok((0..y.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(y.len());
            let (sum, n) = y[lo..hi]
                .iter()
                .filter(|v| !v.is_nan())
                .fold((0.0, 0usize), |(s, n), &v| (s + v, n + 1));
            if n == 0 {
                f64::NAN
            } else {
                sum / n as f64
            }
        })
        .collect())
}

/// Runs the full cluster / aggregate / impute / smooth pipeline.
pub fn discover(p_x: &[f64], p_y: &[f64], params: &RelDiscParams) -> Result<LookupTable> {
    params.validate()?;
    if p_x.len() != p_y.len() {
        return Err(Error::InvalidParameter(format!(
            "feature lengths differ ({} vs {})",
            p_x.len(),
            p_y.len()
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = p_x
        .iter()
        .zip(p_y)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(&x, &y)| (x, y))
        .unzip();
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }

    let line = make_centroid_line(&xs, params.k)?;
    let max_iters = match params.mode {
        KmeansMode::Frozen => 1,
        KmeansMode::Lloyd => LLOYD_MAX_ITERS,
    };
    let (assignment, line) = kmeans1d_assign(&xs, &line, max_iters, params.mode)?;
    let k = line.k();

    let mut members: Vec<Vec<f64>> = vec![Vec::new(); k];
    for (&label, &y) in assignment.labels.iter().zip(&ys) {
        members[label].push(y);
    }
    let counts: Vec<usize> = members.iter().map(Vec::len).collect();
    let y: Vec<f64> = members
        .iter()
        .map(|vals| aggregate_cluster(vals, params.aggregate, params.gamma))
        .collect();

    let pigeonholed = counts.iter().filter(|&&c| c == 0).count();
    if pigeonholed > 0 {
        warn!("{pigeonholed} of {k} clusters are pigeonholed (no samples); consider a smaller k");
    }

    let y_imputed = impute(&y, params.imputation);
    let y_smooth = match params.smoothing {
        Smoothing::None => y_imputed.clone(),
        Smoothing::MovingAverage(w) => smooth(&y_imputed, w)?,
    };

    let x = line.centroids().to_vec();
    let x_max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let right_edges = (0..k)
        .map(|j| if j + 1 < k { x[j] + (x[j + 1] - x[j]) / 2.0 } else { x_max.max(x[j]) })
        .collect();

    Ok(LookupTable {
        x,
        y,
        y_imputed,
        y_smooth,
        counts,
        right_edges,
    })
}
