use std::io::Write;

use serde::Serialize;

use super::LookupTable;
use crate::error::Result;

pub const MAX_SCATTER_POINTS: usize = 10_000;

fn field(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

/// Writes `x,y,y_smooth,count`. With `imputed` false the raw `y` is written
/// and missing clusters are empty fields.
pub fn write_lookup_csv<W: Write>(writer: W, table: &LookupTable, imputed: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "y", "y_smooth", "count"])?;
    let y = if imputed { &table.y_imputed } else { &table.y };
    for j in 0..table.k() {
        w.write_record([
            field(table.x[j]),
            field(y[j]),
            field(table.y_smooth[j]),
            table.counts[j].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scatter {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Data-only payload for external chart tools. Missing values are `null`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotData {
    pub x: Vec<f64>,
    pub y: Vec<Option<f64>>,
    pub y_smooth: Vec<Option<f64>>,
    pub scatter: Scatter,
}

fn opt(v: &[f64]) -> Vec<Option<f64>> {
    v.iter().map(|&v| (!v.is_nan()).then_some(v)).collect()
}

impl PlotData {
    /// Raw pairs with a missing coordinate are dropped; the rest are
    /// subsampled at uniform stride down to [`MAX_SCATTER_POINTS`].
    pub fn new(table: &LookupTable, p_x: &[f64], p_y: &[f64]) -> Self {
        let pairs: Vec<(f64, f64)> = p_x
            .iter()
            .zip(p_y)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| (x, y))
            .collect();
        let picked: Vec<(f64, f64)> = if pairs.len() > MAX_SCATTER_POINTS {
            (0..MAX_SCATTER_POINTS)
                .map(|i| pairs[i * pairs.len() / MAX_SCATTER_POINTS])
                .collect()
        } else {
            pairs
        };
        let (x, y) = picked.into_iter().unzip();
        PlotData {
            x: table.x.clone(),
            y: opt(&table.y),
            y_smooth: opt(&table.y_smooth),
            scatter: Scatter { x, y },
        }
    }
}
