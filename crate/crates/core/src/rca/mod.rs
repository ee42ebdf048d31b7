//! Root-cause analysis of a degraded KPI.
//!
//! Every column is turned into a binary anomaly vector: the KPI by its
//! absolute threshold, event pulses as-is, and periodic columns by DBSCAN
//! noise labels on the min-max scaled pair `[column, kpi]`, with epsilon
//! chosen per column to maximise `|phi|` against the KPI flags. Columns are
//! then ranked by `|phi|`, masked by the expert causality filter, and the
//! argmax is reported together with its `|phi|` as a certainty score.

mod filter;
mod phi;

pub use filter::CausalityFilter;
pub use phi::{abs_phi_or_zero, phi, Contingency};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{dbscan, minmax_scale, DbscanParams};
use crate::error::{Error, Result};
use crate::telemetry::io::WindowInfo;
use crate::telemetry::DesignMatrix;

pub const DEFAULT_EPSILON_GRID: [f64; 3] = [0.1, 0.3, 0.5];
pub const DEFAULT_MIN_PTS: usize = 5;
/// Drop-rate style KPIs degrade above 1 (percent).
pub const DEFAULT_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    AboveIsBad,
    BelowIsBad,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::AboveIsBad => "above_is_bad",
            Direction::BelowIsBad => "below_is_bad",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "above_is_bad" | "above" => Ok(Direction::AboveIsBad),
            "below_is_bad" | "below" => Ok(Direction::BelowIsBad),
            _ => Err(Error::InvalidParameter(format!("unknown direction `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KpiSpec {
    pub column_index: usize,
    pub threshold: f64,
    pub direction: Direction,
}

impl KpiSpec {
    pub fn new(column_index: usize, threshold: f64, direction: Direction) -> Result<Self> {
        if !threshold.is_finite() {
            return Err(Error::InvalidParameter("KPI threshold must be finite".into()));
        }
        Ok(Self {
            column_index,
            threshold,
            direction,
        })
    }
}

/// Flags rows where the KPI strictly violates its threshold. Missing values
/// are never flagged.
pub fn binarize_kpi(values: &[f64], spec: &KpiSpec) -> Vec<bool> {
    values
        .iter()
        .map(|&v| match spec.direction {
            Direction::AboveIsBad => v > spec.threshold,
            Direction::BelowIsBad => v < spec.threshold,
        })
        .collect()
}

fn is_binary(values: &[f64]) -> bool {
    values.iter().filter(|v| !v.is_nan()).all(|&v| v == 0.0 || v == 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinarizedColumn {
    pub flags: Vec<bool>,
    /// `None` when DBSCAN was bypassed.
    pub chosen_epsilon: Option<f64>,
}

/// Anomaly flags for one non-KPI column. Already-binary columns pass
/// through; otherwise every epsilon in the grid is tried and the one giving
/// the largest `|phi|` against `kpi_flags` wins, ties going to the smaller
/// epsilon. Rows missing in either column are never flagged.
pub fn binarize_column(
    column: &[f64],
    kpi_flags: &[bool],
    kpi: &[f64],
    epsilon_grid: &[f64],
    min_pts: usize,
) -> Result<BinarizedColumn> {
    let m = column.len();
    if kpi_flags.len() != m || kpi.len() != m {
        return Err(Error::InvalidParameter("column, KPI and KPI flags differ in length".into()));
    }
    if epsilon_grid.is_empty() {
        return Err(Error::InvalidParameter("epsilon grid is empty".into()));
    }
    if is_binary(column) {
        return Ok(BinarizedColumn {
            flags: column.iter().map(|&v| v == 1.0).collect(),
            chosen_epsilon: None,
        });
    }

    let valid: Vec<usize> = (0..m)
        .filter(|&r| column[r].is_finite() && kpi[r].is_finite())
        .collect();
    let xs = minmax_scale(&valid.iter().map(|&r| column[r]).collect::<Vec<_>>());
    let ys = minmax_scale(&valid.iter().map(|&r| kpi[r]).collect::<Vec<_>>());
    let points: Vec<[f64; 2]> = xs.into_iter().zip(ys).map(|(x, y)| [x, y]).collect();
    let target: Vec<bool> = valid.iter().map(|&r| kpi_flags[r]).collect();

    let mut grid = epsilon_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut best: Option<(f64, f64, Vec<bool>)> = None;
    for eps in grid {
        let result = dbscan(&points, &DbscanParams::new(eps, min_pts)?)?;
        let score = abs_phi_or_zero(&result.anomaly_flags, &target)?;
        if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            best = Some((score, eps, result.anomaly_flags));
        }
    }
    let (_, eps, local) = best.expect("grid is non-empty");
    let mut flags = vec![false; m];
    for (&r, f) in valid.iter().zip(local) {
        flags[r] = f;
    }
    Ok(BinarizedColumn {
        flags,
        chosen_epsilon: Some(eps),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RcaParams {
    pub epsilon_grid: Vec<f64>,
    pub min_pts: usize,
}

impl Default for RcaParams {
    fn default() -> Self {
        Self {
            epsilon_grid: DEFAULT_EPSILON_GRID.to_vec(),
            min_pts: DEFAULT_MIN_PTS,
        }
    }
}

/// Binary anomaly matrix, stored by column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnomalyMatrix {
    pub columns: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankEntry {
    pub index: usize,
    pub column: String,
    pub g: f64,
    /// Signed phi against the KPI flags; `None` where undefined.
    pub phi: Option<f64>,
    pub chosen_epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootCause {
    pub index: usize,
    pub column: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RcaReport {
    pub kpi: String,
    pub kpi_spec: KpiSpec,
    pub root_cause: Option<RootCause>,
    /// `|phi|` of the root cause, 0 when there is none.
    pub score: f64,
    /// All non-KPI columns by descending `g`, then ascending index.
    pub ranking: Vec<RankEntry>,
    /// `|phi|` per column before the causality mask (0 for the KPI).
    pub correlations: Vec<f64>,
    pub anomaly_matrix: AnomalyMatrix,
    pub window: WindowInfo,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    kpi: &'a str,
    threshold: f64,
    direction: Direction,
    root_cause: Option<&'a str>,
    score: f64,
    ranking: Vec<RankJson<'a>>,
    window: WindowJson,
}

#[derive(Serialize)]
struct RankJson<'a> {
    column: &'a str,
    g: f64,
    phi: Option<f64>,
    chosen_epsilon: Option<f64>,
}

#[derive(Serialize)]
struct WindowJson {
    start: i64,
    delta_t: i64,
    rows: usize,
}

impl RcaReport {
    pub fn to_json(&self) -> Result<String> {
        let view = ReportJson {
            kpi: &self.kpi,
            threshold: self.kpi_spec.threshold,
            direction: self.kpi_spec.direction,
            root_cause: self.root_cause.as_ref().map(|c| c.column.as_str()),
            score: self.score,
            ranking: self
                .ranking
                .iter()
                .map(|e| RankJson {
                    column: &e.column,
                    g: e.g,
                    phi: e.phi,
                    chosen_epsilon: e.chosen_epsilon,
                })
                .collect(),
            window: WindowJson {
                start: self.window.start,
                delta_t: self.window.delta_t,
                rows: self.window.rows,
            },
        };
        Ok(serde_json::to_string_pretty(&view)?)
    }
}

struct ColumnOutcome {
    flags: Vec<bool>,
    phi: Option<f64>,
    chosen_epsilon: Option<f64>,
}

/// Full diagnosis of one KPI over one design matrix.
pub fn diagnose(
    matrix: &DesignMatrix,
    spec: &KpiSpec,
    filter: &CausalityFilter,
    params: &RcaParams,
) -> Result<RcaReport> {
    let n = matrix.n_columns();
    let v = spec.column_index;
    if v >= n {
        return Err(Error::InvalidParameter(format!("KPI column {v} out of range (n = {n})")));
    }
    if filter.mask().len() != n || filter.kpi_column() != v {
        return Err(Error::InvalidParameter(
            "causality filter is not aligned with the matrix and KPI".into(),
        ));
    }
    let kpi = &matrix.column(v).values;
    let kpi_flags = binarize_kpi(kpi, spec);

    let outcomes = (0..n)
        .into_par_iter()
        .map(|i| {
            if i == v {
                return Ok(ColumnOutcome {
                    flags: kpi_flags.clone(),
                    phi: None,
                    chosen_epsilon: None,
                });
            }
            let col = &matrix.column(i).values;
            let b = binarize_column(col, &kpi_flags, kpi, &params.epsilon_grid, params.min_pts)?;
            let (x, y): (Vec<bool>, Vec<bool>) = (0..col.len())
                .filter(|&r| col[r].is_finite() && kpi[r].is_finite())
                .map(|r| (b.flags[r], kpi_flags[r]))
                .unzip();
            Ok(ColumnOutcome {
                phi: phi(&x, &y)?,
                flags: b.flags,
                chosen_epsilon: b.chosen_epsilon,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let correlations: Vec<f64> = outcomes.iter().map(|o| o.phi.map_or(0.0, f64::abs)).collect();
    let g: Vec<f64> = correlations
        .iter()
        .enumerate()
        .map(|(i, &r)| if filter.allows(i) { r } else { 0.0 })
        .collect();

    let mut best: Option<usize> = None;
    for (i, &gi) in g.iter().enumerate() {
        if gi > 0.0 && best.is_none_or(|b| gi > g[b]) {
            best = Some(i);
        }
    }

    let mut ranking: Vec<RankEntry> = (0..n)
        .filter(|&i| i != v)
        .map(|i| RankEntry {
            index: i,
            column: matrix.column(i).name.clone(),
            g: g[i],
            phi: outcomes[i].phi,
            chosen_epsilon: outcomes[i].chosen_epsilon,
        })
        .collect();
    ranking.sort_by(|a, b| b.g.total_cmp(&a.g).then(a.index.cmp(&b.index)));

    Ok(RcaReport {
        kpi: matrix.column(v).name.clone(),
        kpi_spec: *spec,
        root_cause: best.map(|i| RootCause {
            index: i,
            column: matrix.column(i).name.clone(),
        }),
        score: best.map_or(0.0, |i| correlations[i]),
        ranking,
        correlations,
        anomaly_matrix: AnomalyMatrix {
            columns: outcomes.into_iter().map(|o| o.flags).collect(),
        },
        window: matrix.grid().into(),
    })
}

/// Fraction of diagnostic runs whose prediction matches the expert's answer.
pub fn accuracy<T: PartialEq>(predictions: &[T], truths: &[T]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::EmptyInput);
    }
    if predictions.len() != truths.len() {
        return Err(Error::InvalidParameter(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    let hits = predictions.iter().zip(truths).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / predictions.len() as f64)
}
