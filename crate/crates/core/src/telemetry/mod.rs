//! Time grid, telemetry records and design-matrix assembly.
//!
//! Periodic PM data already lives on the grid. Event-driven FM and CM records
//! are binned to the grid and integrated into rectangular 0/1 pulses, so that
//! every data source ends up as one column of a single `m x n` matrix.

pub mod io;

use std::collections::HashSet;
use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Epoch milliseconds, UTC.
pub type Timestamp = i64;

/// Common time axis: `rows = ceil(window / delta_t)` bins starting at
/// `window_start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    window_start: Timestamp,
    delta_t: i64,
    window: i64,
    rows: usize,
}

impl TimeGrid {
    pub fn new(window_start: Timestamp, delta_t: i64, window: i64) -> Result<Self> {
        if delta_t <= 0 {
            return Err(Error::InvalidGrid(format!("delta_t must be > 0, got {delta_t}")));
        }
        if window <= 0 {
            return Err(Error::InvalidGrid(format!("window must be > 0, got {window}")));
        }
        let rows = (window / delta_t + i64::from(window % delta_t != 0)) as usize;
        Ok(Self {
            window_start,
            delta_t,
            window,
            rows,
        })
    }

    pub fn window_start(&self) -> Timestamp {
        self.window_start
    }

    pub fn delta_t(&self) -> i64 {
        self.delta_t
    }

    pub fn window(&self) -> i64 {
        self.window
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Exclusive end of the window.
    pub fn window_end(&self) -> Timestamp {
        self.window_start + self.window
    }

    /// Binned time of row `i`.
    pub fn bin_start(&self, i: usize) -> Timestamp {
        self.window_start + i as i64 * self.delta_t
    }
}

/// Row index of `t` (floor binning). Errors for timestamps outside the window.
pub fn bin_time(t: Timestamp, grid: &TimeGrid) -> Result<usize> {
    if t < grid.window_start {
        return Err(Error::OutOfWindowBefore {
            t,
            start: grid.window_start,
        });
    }
    if t >= grid.window_end() {
        return Err(Error::OutOfWindowAfter {
            t,
            end: grid.window_end(),
        });
    }
    Ok(((t - grid.window_start) / grid.delta_t) as usize)
}

/// Bin index used for the end of a pulse: timestamps at or past the window
/// end map to the exclusive sentinel `rows`, timestamps before the start to 0.
pub fn bin_end(t: Timestamp, grid: &TimeGrid) -> usize {
    if t < grid.window_start {
        0
    } else if t >= grid.window_end() {
        grid.rows
    } else {
        ((t - grid.window_start) / grid.delta_t) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ColumnKind {
    #[serde(rename = "PM")]
    Pm,
    #[serde(rename = "FM")]
    Fm,
    #[serde(rename = "CM")]
    Cm,
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnKind::Pm => "PM",
            ColumnKind::Fm => "FM",
            ColumnKind::Cm => "CM",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PmKind {
    #[default]
    Counter,
    Kpi,
}

/// One periodic PM column. `NaN` marks a missing report.
#[derive(Debug, Clone, PartialEq)]
pub struct PmSeries {
    pub name: String,
    pub kind: PmKind,
    pub values: Vec<f64>,
}

impl PmSeries {
    pub fn new(name: impl Into<String>, kind: PmKind, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            kind,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FmEvent {
    pub alarm_id: String,
    pub raised_at: Timestamp,
    /// `None` means the alarm was never cleared.
    pub cleared_at: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CmEvent {
    pub param_id: String,
    pub old_value: String,
    pub new_value: String,
    pub changed_at: Timestamp,
    /// `None` means the change was never reverted.
    pub reverted_at: Option<Timestamp>,
}

/// Raw activity interval of one event, before binning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventSpan {
    pub start: Timestamp,
    pub end: Option<Timestamp>,
}

impl From<&FmEvent> for EventSpan {
    fn from(e: &FmEvent) -> Self {
        EventSpan {
            start: e.raised_at,
            end: e.cleared_at,
        }
    }
}

impl From<&CmEvent> for EventSpan {
    fn from(e: &CmEvent) -> Self {
        EventSpan {
            start: e.changed_at,
            end: e.reverted_at,
        }
    }
}

/// All events sharing one alarm or parameter id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSeries {
    pub id: String,
    pub spans: Vec<EventSpan>,
}

impl EventSeries {
    pub fn new(id: impl Into<String>, spans: Vec<EventSpan>) -> Self {
        Self {
            id: id.into(),
            spans,
        }
    }
}

/// Rectangular pulse over the grid: bin `i` is set iff some event satisfies
/// `bin(start) <= i < bin(end)`. Overlapping events are OR-ed together.
pub fn reconstruct_pulse(events: &[EventSpan], grid: &TimeGrid) -> Vec<bool> {
    let mut pulse = vec![false; grid.rows()];
    for ev in events {
        if ev.start >= grid.window_end() {
            continue;
        }
        if matches!(ev.end, Some(end) if end < grid.window_start()) {
            continue;
        }
        // alarms raised before the window and still active start at row 0
        let first = bin_end(ev.start, grid);
        let last = ev.end.map_or(grid.rows(), |end| bin_end(end, grid));
        if first >= last {
            if ev.end.is_some_and(|end| end >= ev.start) {
                warn!(
                    "event [{}, {:?}) collapses to zero duration after binning",
                    ev.start, ev.end
                );
            }
            continue;
        }
        pulse[first..last].iter_mut().for_each(|b| *b = true);
    }
    pulse
}

/// Decomposes a pulse into half-open `[start, end)` runs of set bins.
pub fn pulse_runs(pulse: &[bool]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut open = None;
    for (i, &b) in pulse.iter().enumerate() {
        match (b, open) {
            (true, None) => open = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        runs.push((s, pulse.len()));
    }
    runs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub values: Vec<f64>,
}

/// Fused `m x n` matrix for one base station and one window, stored by column.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    grid: TimeGrid,
    columns: Vec<Column>,
}

impl DesignMatrix {
    pub fn new(grid: TimeGrid, columns: Vec<Column>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::NoColumns);
        }
        let mut seen = HashSet::new();
        for col in &columns {
            if !seen.insert(col.name.as_str()) {
                return Err(Error::DuplicateColumn(col.name.clone()));
            }
            if col.values.len() != grid.rows() {
                return Err(Error::LengthMismatch {
                    name: col.name.clone(),
                    got: col.values.len(),
                    expected: grid.rows(),
                });
            }
            if col.kind != ColumnKind::Pm && col.values.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{} column `{}` must contain only 0 and 1",
                    col.kind, col.name
                )));
            }
        }
        Ok(Self { grid, columns })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn rows(&self) -> usize {
        self.grid.rows()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, i: usize) -> &Column {
        &self.columns[i]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn count_kind(&self, kind: ColumnKind) -> usize {
        self.columns.iter().filter(|c| c.kind == kind).count()
    }

    pub fn metas(&self) -> Vec<ColumnMeta> {
        self.columns
            .iter()
            .map(|c| ColumnMeta {
                name: c.name.clone(),
                kind: c.kind,
            })
            .collect()
    }

    /// Keeps only the listed rows, on a new grid.
    pub fn select_rows(&self, rows: &[usize], grid: TimeGrid) -> Result<Self> {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                kind: c.kind,
                values: rows.iter().map(|&r| c.values[r]).collect(),
            })
            .collect();
        DesignMatrix::new(grid, columns)
    }
}

/// Forward fill, then back-fill a leading gap, then zero an all-missing column.
pub fn impute_pm(values: &[f64]) -> Vec<f64> {
    let first = values.iter().copied().find(|v| !v.is_nan()).unwrap_or(0.0);
    let mut last = first;
    values
        .iter()
        .map(|&v| {
            if !v.is_nan() {
                last = v;
            }
            last
        })
        .collect()
}

/// Assembles `[PM..., FM..., CM...]` for one base station.
pub fn build_design_matrix(
    pm: &[PmSeries],
    fm: &[EventSeries],
    cm: &[EventSeries],
    grid: &TimeGrid,
) -> Result<DesignMatrix> {
    let mut columns = Vec::with_capacity(pm.len() + fm.len() + cm.len());
    for series in pm {
        if series.values.len() != grid.rows() {
            return Err(Error::LengthMismatch {
                name: series.name.clone(),
                got: series.values.len(),
                expected: grid.rows(),
            });
        }
        if series.values.iter().any(|v| v.is_infinite()) {
            return Err(Error::NonFiniteInput);
        }
        columns.push(Column {
            name: series.name.clone(),
            kind: ColumnKind::Pm,
            values: impute_pm(&series.values),
        });
    }
    for (kind, group) in [(ColumnKind::Fm, fm), (ColumnKind::Cm, cm)] {
        for series in group {
            let pulse = reconstruct_pulse(&series.spans, grid);
            columns.push(Column {
                name: series.id.clone(),
                kind,
                values: pulse.into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect(),
            });
        }
    }
    DesignMatrix::new(*grid, columns)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HOUR: i64 = 3_600_000;

    fn grid(rows: i64) -> TimeGrid {
        TimeGrid::new(0, HOUR, rows * HOUR).unwrap()
    }

    #[test]
    fn rows_is_ceiling() {
        assert_eq!(TimeGrid::new(0, HOUR, 120 * HOUR).unwrap().rows(), 120);
        assert_eq!(TimeGrid::new(0, HOUR, 5 * HOUR + 1).unwrap().rows(), 6);
        assert_eq!(TimeGrid::new(0, HOUR, 1).unwrap().rows(), 1);
        assert!(TimeGrid::new(0, 0, HOUR).is_err());
        assert!(TimeGrid::new(0, HOUR, 0).is_err());
    }

    #[test]
    fn binning_floors() {
        let g = grid(6);
        assert_eq!(bin_time(0, &g).unwrap(), 0);
        assert_eq!(bin_time(HOUR * 14 / 10, &g).unwrap(), 1);
        assert_eq!(bin_time(HOUR * 36 / 10, &g).unwrap(), 3);
        assert!(matches!(bin_time(-1, &g), Err(Error::OutOfWindowBefore { .. })));
        assert!(matches!(bin_time(6 * HOUR, &g), Err(Error::OutOfWindowAfter { .. })));
        assert_eq!(bin_end(6 * HOUR, &g), 6);
        assert_eq!(bin_end(100 * HOUR, &g), 6);
    }

    fn span(s: i64, e: Option<i64>) -> EventSpan {
        EventSpan { start: s, end: e }
    }

    #[test]
    fn pulse_from_binned_interval() {
        let g = grid(6);
        let p = reconstruct_pulse(&[span(HOUR + 5, Some(4 * HOUR + 100))], &g);
        assert_eq!(p, [false, true, true, true, false, false]);
    }

    #[test]
    fn pulse_edge_cases() {
        let g = grid(4);
        assert_eq!(reconstruct_pulse(&[], &g), vec![false; 4]);
        let p = reconstruct_pulse(&[span(HOUR, Some(2 * HOUR)), span(HOUR, Some(3 * HOUR))], &g);
        assert_eq!(p, [false, true, true, false]);
        // never cleared
        assert_eq!(reconstruct_pulse(&[span(2 * HOUR, None)], &g), [false, false, true, true]);
        // same-bin raise and clear
        assert_eq!(reconstruct_pulse(&[span(HOUR + 1, Some(HOUR + 9))], &g), vec![false; 4]);
        // raised after the window, cleared before it
        assert_eq!(reconstruct_pulse(&[span(4 * HOUR, None)], &g), vec![false; 4]);
        assert_eq!(reconstruct_pulse(&[span(-5 * HOUR, Some(-HOUR))], &g), vec![false; 4]);
        // raised before the window, still active inside it
        assert_eq!(
            reconstruct_pulse(&[span(-HOUR, Some(2 * HOUR))], &g),
            [true, true, false, false]
        );
    }

    #[test]
    fn runs_decomposition() {
        assert_eq!(pulse_runs(&[false, true, true, false, true]), vec![(1, 3), (4, 5)]);
        assert!(pulse_runs(&[false, false]).is_empty());
    }

    #[test]
    fn matrix_layout_and_kinds() {
        let g = grid(4);
        let pm = vec![
            PmSeries::new("a", PmKind::Counter, vec![1.0, 2.0, 3.0, 4.0]),
            PmSeries::new("b", PmKind::Kpi, vec![0.1; 4]),
        ];
        let fm = vec![EventSeries::new("alarm", vec![span(HOUR, Some(2 * HOUR))])];
        let cm = vec![EventSeries::new("param", vec![])];
        let m = build_design_matrix(&pm, &fm, &cm, &g).unwrap();
        assert_eq!(m.n_columns(), 4);
        let kinds: Vec<_> = m.columns().iter().map(|c| c.kind).collect();
        assert_eq!(kinds, [ColumnKind::Pm, ColumnKind::Pm, ColumnKind::Fm, ColumnKind::Cm]);
        assert_eq!(m.column(2).values, [0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn matrix_errors() {
        let g = grid(2);
        assert!(matches!(build_design_matrix(&[], &[], &[], &g), Err(Error::NoColumns)));
        let pm = vec![PmSeries::new("x", PmKind::Counter, vec![0.0; 2])];
        let fm = vec![EventSeries::new("x", vec![])];
        assert!(matches!(
            build_design_matrix(&pm, &fm, &[], &g),
            Err(Error::DuplicateColumn(_))
        ));
        let short = vec![PmSeries::new("x", PmKind::Counter, vec![0.0])];
        assert!(build_design_matrix(&short, &[], &[], &g).is_err());
    }

    #[test]
    fn pm_imputation() {
        let g = grid(5);
        let pm = vec![
            PmSeries::new("gap", PmKind::Counter, vec![1.0, 2.0, 5.0, f64::NAN, 7.0]),
            PmSeries::new("lead", PmKind::Counter, vec![f64::NAN, f64::NAN, 3.0, 4.0, f64::NAN]),
            PmSeries::new("empty", PmKind::Counter, vec![f64::NAN; 5]),
        ];
        let m = build_design_matrix(&pm, &[], &[], &g).unwrap();
        assert_eq!(m.column(0).values, [1.0, 2.0, 5.0, 5.0, 7.0]);
        assert_eq!(m.column(1).values, [3.0, 3.0, 3.0, 4.0, 4.0]);
        assert_eq!(m.column(2).values, [0.0; 5]);
    }

    #[test]
    fn operator_scale_shape() {
        let g = TimeGrid::new(0, HOUR, 5 * 24 * HOUR).unwrap();
        assert_eq!(g.rows(), 120);
        let pm: Vec<_> = (0..200)
            .map(|i| PmSeries::new(format!("c{i}"), PmKind::Counter, vec![0.0; 120]))
            .collect();
        let fm: Vec<_> = (0..40).map(|i| EventSeries::new(format!("a{i}"), vec![])).collect();
        let cm: Vec<_> = (0..26).map(|i| EventSeries::new(format!("p{i}"), vec![])).collect();
        let m = build_design_matrix(&pm, &fm, &cm, &g).unwrap();
        assert_eq!((m.rows(), m.n_columns()), (120, 266));
    }
}
