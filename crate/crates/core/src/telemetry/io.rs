//! CSV ingestion of PM/FM/CM exports and the design-matrix file format.

use std::collections::HashMap;
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use log::warn;
use serde::{Deserialize, Serialize};

use super::{
    bin_time, CmEvent, Column, ColumnMeta, DesignMatrix, EventSeries, EventSpan, FmEvent,
    PmKind, PmSeries, TimeGrid, Timestamp,
};
use crate::error::{Error, Result};

/// Parses epoch milliseconds or an ISO-8601 timestamp (naive forms are UTC).
pub fn parse_timestamp(s: &str) -> Option<Timestamp> {
    let s = s.trim();
    if let Ok(ms) = s.parse::<i64>() {
        return Some(ms);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp_millis());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp_millis());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp_millis())
}

/// Parses a duration in milliseconds: a bare integer, or a humantime string
/// such as `1h`, `15min` or `5days`.
pub fn parse_duration_ms(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(ms) = s.parse::<i64>() {
        return Some(ms);
    }
    humantime::parse_duration(s)
        .ok()
        .and_then(|d| i64::try_from(d.as_millis()).ok())
}

fn optional_timestamp(field: &str) -> Option<Option<Timestamp>> {
    if field.trim().is_empty() {
        Some(None)
    } else {
        parse_timestamp(field).map(Some)
    }
}

fn expect_header(
    source: &str,
    headers: &csv::StringRecord,
    expected: &[&str],
    exact: bool,
) -> Result<()> {
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    let ok = if exact {
        got == expected
    } else {
        got.len() > expected.len() && got[..expected.len()] == *expected
    };
    if ok {
        Ok(())
    } else {
        Err(Error::parse(
            source,
            1,
            format!("expected header starting with `{}`", expected.join(",")),
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmRecord {
    pub line: u64,
    pub timestamp: Timestamp,
    pub bs_id: String,
    pub values: Vec<f64>,
}

/// Parsed PM export covering any number of base stations.
#[derive(Debug, Clone, PartialEq)]
pub struct PmData {
    pub columns: Vec<String>,
    pub records: Vec<PmRecord>,
}

impl PmData {
    /// Base-station ids in order of first appearance.
    pub fn bs_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = Vec::new();
        for r in &self.records {
            if !ids.contains(&r.bs_id) {
                ids.push(r.bs_id.clone());
            }
        }
        ids
    }

    pub fn time_span(&self) -> Option<(Timestamp, Timestamp)> {
        let min = self.records.iter().map(|r| r.timestamp).min()?;
        let max = self.records.iter().map(|r| r.timestamp).max()?;
        Some((min, max))
    }

    /// Places one station's reports on the grid. Rows outside the window are
    /// dropped; unreported bins stay `NaN`.
    pub fn series_for(&self, bs_id: &str, grid: &TimeGrid, source: &str) -> Result<Vec<PmSeries>> {
        let mut data = vec![vec![f64::NAN; grid.rows()]; self.columns.len()];
        let mut filled = vec![None::<u64>; grid.rows()];
        let mut skipped = 0usize;
        for r in self.records.iter().filter(|r| r.bs_id == bs_id) {
            let Ok(row) = bin_time(r.timestamp, grid) else {
                skipped += 1;
                continue;
            };
            if let Some(prev) = filled[row] {
                return Err(Error::parse(
                    source,
                    r.line,
                    format!("second report for bs `{bs_id}` in time bin {row} (first at line {prev})"),
                ));
            }
            filled[row] = Some(r.line);
            for (col, &v) in data.iter_mut().zip(&r.values) {
                col[row] = v;
            }
        }
        if skipped > 0 {
            warn!("bs {bs_id}: {skipped} PM rows outside the window were ignored");
        }
        Ok(self
            .columns
            .iter()
            .zip(data)
            .map(|(name, values)| PmSeries::new(name.clone(), PmKind::Counter, values))
            .collect())
    }
}

fn parse_value(field: &str) -> Option<f64> {
    let field = field.trim();
    if field.is_empty() || field.eq_ignore_ascii_case("nan") {
        return Some(f64::NAN);
    }
    field.parse::<f64>().ok().filter(|v| !v.is_infinite())
}

/// Reads `timestamp,bs_id,<column>...`.
pub fn read_pm_csv<R: Read>(reader: R, source: &str) -> Result<PmData> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    expect_header(source, &headers, &["timestamp", "bs_id"], false)?;
    let columns: Vec<String> = headers.iter().skip(2).map(|h| h.trim().to_string()).collect();
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(Error::parse(
                source,
                line,
                format!("expected {} fields, found {}", headers.len(), rec.len()),
            ));
        }
        let timestamp = parse_timestamp(&rec[0])
            .ok_or_else(|| Error::parse(source, line, format!("malformed timestamp `{}`", &rec[0])))?;
        let values = rec
            .iter()
            .skip(2)
            .zip(&columns)
            .map(|(f, name)| {
                parse_value(f).ok_or_else(|| {
                    Error::parse(source, line, format!("malformed value `{f}` in column `{name}`"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        records.push(PmRecord {
            line,
            timestamp,
            bs_id: rec[1].trim().to_string(),
            values,
        });
    }
    Ok(PmData { columns, records })
}

fn check_order(source: &str, line: u64, start: Timestamp, end: Option<Timestamp>) -> Result<()> {
    match end {
        Some(e) if e < start => Err(Error::parse(source, line, "event ends before it starts")),
        _ => Ok(()),
    }
}

/// Reads `bs_id,alarm_id,raised_at,cleared_at`; empty `cleared_at` is an open alarm.
pub fn read_fm_csv<R: Read>(reader: R, source: &str) -> Result<Vec<(String, FmEvent)>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    expect_header(source, &headers, &["bs_id", "alarm_id", "raised_at", "cleared_at"], true)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec?;
        if rec.len() != 4 {
            return Err(Error::parse(source, line, format!("expected 4 fields, found {}", rec.len())));
        }
        let raised_at = parse_timestamp(&rec[2])
            .ok_or_else(|| Error::parse(source, line, format!("malformed timestamp `{}`", &rec[2])))?;
        let cleared_at = optional_timestamp(&rec[3])
            .ok_or_else(|| Error::parse(source, line, format!("malformed timestamp `{}`", &rec[3])))?;
        check_order(source, line, raised_at, cleared_at)?;
        out.push((
            rec[0].trim().to_string(),
            FmEvent {
                alarm_id: rec[1].trim().to_string(),
                raised_at,
                cleared_at,
            },
        ));
    }
    Ok(out)
}

/// Reads `bs_id,param_id,old_value,new_value,changed_at,reverted_at`.
pub fn read_cm_csv<R: Read>(reader: R, source: &str) -> Result<Vec<(String, CmEvent)>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    expect_header(
        source,
        &headers,
        &["bs_id", "param_id", "old_value", "new_value", "changed_at", "reverted_at"],
        true,
    )?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec?;
        if rec.len() != 6 {
            return Err(Error::parse(source, line, format!("expected 6 fields, found {}", rec.len())));
        }
        let changed_at = parse_timestamp(&rec[4])
            .ok_or_else(|| Error::parse(source, line, format!("malformed timestamp `{}`", &rec[4])))?;
        let reverted_at = optional_timestamp(&rec[5])
            .ok_or_else(|| Error::parse(source, line, format!("malformed timestamp `{}`", &rec[5])))?;
        check_order(source, line, changed_at, reverted_at)?;
        out.push((
            rec[0].trim().to_string(),
            CmEvent {
                param_id: rec[1].trim().to_string(),
                old_value: rec[2].to_string(),
                new_value: rec[3].to_string(),
                changed_at,
                reverted_at,
            },
        ));
    }
    Ok(out)
}

/// Groups one station's events by id, in order of first appearance.
pub fn group_events<'a, E: 'a>(
    events: impl IntoIterator<Item = &'a (String, E)>,
    bs_id: &str,
    id_of: impl Fn(&E) -> &str,
) -> Vec<EventSeries>
where
    for<'e> &'e E: Into<EventSpan>,
{
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut out: Vec<EventSeries> = Vec::new();
    for (bs, ev) in events {
        if bs != bs_id {
            continue;
        }
        let id = id_of(ev);
        let slot = *index.entry(id.to_string()).or_insert_with(|| {
            out.push(EventSeries::new(id, Vec::new()));
            out.len() - 1
        });
        out[slot].spans.push(ev.into());
    }
    out
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn fmt_opt_ts(t: Option<Timestamp>) -> String {
    t.map(|t| t.to_string()).unwrap_or_default()
}

pub fn write_pm_csv<W: Write>(
    writer: W,
    grid: &TimeGrid,
    bs_id: &str,
    series: &[PmSeries],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["timestamp".to_string(), "bs_id".to_string()];
    header.extend(series.iter().map(|s| s.name.clone()));
    w.write_record(&header)?;
    for row in 0..grid.rows() {
        let mut rec = vec![grid.bin_start(row).to_string(), bs_id.to_string()];
        rec.extend(series.iter().map(|s| fmt_value(s.values[row])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_fm_csv<W: Write>(writer: W, events: &[(String, FmEvent)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["bs_id", "alarm_id", "raised_at", "cleared_at"])?;
    for (bs, e) in events {
        w.write_record([
            bs.as_str(),
            &e.alarm_id,
            &e.raised_at.to_string(),
            &fmt_opt_ts(e.cleared_at),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cm_csv<W: Write>(writer: W, events: &[(String, CmEvent)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["bs_id", "param_id", "old_value", "new_value", "changed_at", "reverted_at"])?;
    for (bs, e) in events {
        w.write_record([
            bs.as_str(),
            &e.param_id,
            &e.old_value,
            &e.new_value,
            &e.changed_at.to_string(),
            &fmt_opt_ts(e.reverted_at),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowInfo {
    pub start: Timestamp,
    pub delta_t: i64,
    pub window: i64,
    pub rows: usize,
}

impl From<&TimeGrid> for WindowInfo {
    fn from(g: &TimeGrid) -> Self {
        WindowInfo {
            start: g.window_start(),
            delta_t: g.delta_t(),
            window: g.window(),
            rows: g.rows(),
        }
    }
}

/// Sidecar JSON describing a matrix CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bs_id: Option<String>,
    pub window: WindowInfo,
    pub columns: Vec<ColumnMeta>,
}

impl Manifest {
    pub fn for_matrix(matrix: &DesignMatrix, bs_id: Option<&str>) -> Self {
        Manifest {
            bs_id: bs_id.map(str::to_string),
            window: matrix.grid().into(),
            columns: matrix.metas(),
        }
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        let g = TimeGrid::new(self.window.start, self.window.delta_t, self.window.window)?;
        if g.rows() != self.window.rows {
            return Err(Error::InvalidGrid(format!(
                "manifest declares {} rows but the window implies {}",
                self.window.rows,
                g.rows()
            )));
        }
        Ok(g)
    }
}

/// Writes `t_bin,<names>...`, one row per bin.
pub fn write_matrix_csv<W: Write>(writer: W, matrix: &DesignMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t_bin".to_string()];
    header.extend(matrix.columns().iter().map(|c| c.name.clone()));
    w.write_record(&header)?;
    for row in 0..matrix.rows() {
        let mut rec = vec![row.to_string()];
        rec.extend(matrix.columns().iter().map(|c| fmt_value(c.values[row])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a matrix CSV against its manifest.
pub fn read_matrix_csv<R: Read>(reader: R, manifest: &Manifest, source: &str) -> Result<DesignMatrix> {
    let grid = manifest.grid()?;
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    let expected: Vec<&str> = std::iter::once("t_bin")
        .chain(manifest.columns.iter().map(|c| c.name.as_str()))
        .collect();
    if names != expected {
        return Err(Error::parse(source, 1, "header does not match the manifest column list"));
    }
    let mut data = vec![Vec::with_capacity(grid.rows()); manifest.columns.len()];
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(Error::parse(source, line, "wrong number of fields"));
        }
        if rec[0].trim().parse::<usize>().ok() != Some(i) {
            return Err(Error::parse(source, line, format!("expected t_bin {i}")));
        }
        for (col, f) in data.iter_mut().zip(rec.iter().skip(1)) {
            col.push(parse_value(f).ok_or_else(|| Error::parse(source, line, format!("malformed value `{f}`")))?);
        }
    }
    let columns = manifest
        .columns
        .iter()
        .zip(data)
        .map(|(meta, values)| Column {
            name: meta.name.clone(),
            kind: meta.kind,
            values,
        })
        .collect();
    DesignMatrix::new(grid, columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::{build_design_matrix, ColumnKind};

    const HOUR: i64 = 3_600_000;

    #[test]
    fn timestamps() {
        assert_eq!(parse_timestamp("1000"), Some(1000));
        assert_eq!(parse_timestamp("1970-01-01T00:00:01Z"), Some(1000));
        assert_eq!(parse_timestamp("1970-01-01T01:00:00+01:00"), Some(0));
        assert_eq!(parse_timestamp("1970-01-01 00:00:02"), Some(2000));
        assert_eq!(parse_timestamp("1970-01-02"), Some(24 * HOUR));
        assert_eq!(parse_timestamp("yesterday"), None);
        assert_eq!(parse_duration_ms("1h"), Some(HOUR));
        assert_eq!(parse_duration_ms("5days"), Some(120 * HOUR));
        assert_eq!(parse_duration_ms("250"), Some(250));
        assert_eq!(parse_duration_ms("soon"), None);
    }

    #[test]
    fn pm_ingest_with_missing_and_line_numbers() {
        let csv = "timestamp,bs_id,a,b\n0,bs1,1,2\n3600000,bs1,,4\n0,bs2,9,9\n";
        let pm = read_pm_csv(csv.as_bytes(), "pm.csv").unwrap();
        assert_eq!(pm.bs_ids(), ["bs1", "bs2"]);
        let g = TimeGrid::new(0, HOUR, 3 * HOUR).unwrap();
        let s = pm.series_for("bs1", &g, "pm.csv").unwrap();
        assert_eq!(s[0].values[0], 1.0);
        assert!(s[0].values[1].is_nan() && s[0].values[2].is_nan());
        assert_eq!(s[1].values[1], 4.0);

        let bad = "timestamp,bs_id,a\n0,bs1,1\nnot-a-time,bs1,2\n";
        let err = read_pm_csv(bad.as_bytes(), "pm.csv").unwrap_err();
        assert!(err.to_string().contains("pm.csv:3"), "{err}");

        let dup = "timestamp,bs_id,a\n0,bs1,1\n10,bs1,2\n";
        let pm = read_pm_csv(dup.as_bytes(), "pm.csv").unwrap();
        let err = pm.series_for("bs1", &g, "pm.csv").unwrap_err();
        assert!(err.to_string().contains("pm.csv:3"), "{err}");
    }

    #[test]
    fn event_ingest() {
        let fm = "bs_id,alarm_id,raised_at,cleared_at\nbs1,A,3600000,7200000\nbs1,B,0,\nbs2,A,0,1\nbs1,A,10800000,\n";
        let events = read_fm_csv(fm.as_bytes(), "fm.csv").unwrap();
        let series = group_events(&events, "bs1", |e: &FmEvent| &e.alarm_id);
        assert_eq!(series.len(), 2);
        assert_eq!(series[0].id, "A");
        assert_eq!(series[0].spans.len(), 2);
        assert_eq!(series[1].spans[0].end, None);

        let backwards = "bs_id,alarm_id,raised_at,cleared_at\nbs1,A,10,5\n";
        assert!(read_fm_csv(backwards.as_bytes(), "fm.csv").is_err());

        let cm = "bs_id,param_id,old_value,new_value,changed_at,reverted_at\nbs1,tilt,2,4,0,3600000\n";
        let events = read_cm_csv(cm.as_bytes(), "cm.csv").unwrap();
        assert_eq!(events[0].1.new_value, "4");
        assert!(read_cm_csv("bs_id,param\n".as_bytes(), "cm.csv").is_err());
    }

    #[test]
    fn matrix_file_round_trip() {
        let g = TimeGrid::new(1_000, HOUR, 4 * HOUR).unwrap();
        let pm = vec![PmSeries::new("kpi", PmKind::Kpi, vec![0.1, 0.30000000000000004, 1e-9, 7.0])];
        let fm = vec![EventSeries::new(
            "alarm",
            vec![EventSpan {
                start: 1_000 + HOUR,
                end: None,
            }],
        )];
        let m = build_design_matrix(&pm, &fm, &[], &g).unwrap();
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, &m).unwrap();
        let manifest = Manifest::for_matrix(&m, Some("bs1"));
        let json = serde_json::to_string(&manifest).unwrap();
        assert!(json.contains(r#"{"name":"alarm","kind":"FM"}"#));
        let back: Manifest = serde_json::from_str(&json).unwrap();
        let m2 = read_matrix_csv(buf.as_slice(), &back, "m.csv").unwrap();
        assert_eq!(m, m2);
        assert_eq!(m2.column(1).kind, ColumnKind::Fm);
    }
}
