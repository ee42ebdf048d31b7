//! Seeded synthetic telemetry with a known injected root cause.
//!
//! PM columns follow a daily sinusoid plus Gaussian noise. The KPI (PM
//! column 0) is pushed past its threshold exactly while the injected cause
//! is active. Decoy alarms and parameter changes are placed independently of
//! the cause.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rca::{CausalityFilter, Direction, KpiSpec};
use crate::telemetry::io::{write_cm_csv, write_fm_csv, write_pm_csv};
use crate::telemetry::{
    build_design_matrix, CmEvent, ColumnKind, DesignMatrix, EventSeries, EventSpan, FmEvent,
    PmKind, PmSeries, TimeGrid, Timestamp,
};

pub const HOUR_MS: i64 = 3_600_000;
pub const DAY_MS: i64 = 24 * HOUR_MS;
/// 2024-01-01T00:00:00Z
pub const DEFAULT_WINDOW_START: Timestamp = 1_704_067_200_000;
/// Hour of day at which the daily sinusoid peaks.
pub const BUSY_HOUR: i64 = 20;
pub const KPI_NAME: &str = "drop_rate";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InjectedCause {
    pub kind: ColumnKind,
    /// Position among the columns of `kind`. PM ordinal 0 is the KPI and is
    /// not a valid cause.
    pub ordinal: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthScenario {
    pub seed: u64,
    pub bs_id: String,
    pub grid: TimeGrid,
    /// PM columns including the KPI.
    pub n_pm: usize,
    pub n_fm: usize,
    pub n_cm: usize,
    pub cause: InjectedCause,
    /// KPI shift in the degrading direction while the cause is active.
    pub effect_size: f64,
    pub threshold: f64,
    pub direction: Direction,
    pub kpi_level: f64,
    pub noise_sigma: f64,
    pub diurnal_amplitude: f64,
    pub cause_episodes: usize,
}

impl SynthScenario {
    /// Five days of hourly data, 4 PM columns and 10 event columns, with the
    /// cause kind and position drawn from the seed.
    pub fn with_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_cafe);
        let (n_fm, n_cm) = (5, 5);
        let cause = if rng.random_bool(0.5) {
            InjectedCause {
                kind: ColumnKind::Fm,
                ordinal: rng.random_range(0..n_fm),
            }
        } else {
            InjectedCause {
                kind: ColumnKind::Cm,
                ordinal: rng.random_range(0..n_cm),
            }
        };
        SynthScenario {
            seed,
            bs_id: "bs1".into(),
            grid: TimeGrid::new(DEFAULT_WINDOW_START, HOUR_MS, 5 * DAY_MS).expect("valid grid"),
            n_pm: 4,
            n_fm,
            n_cm,
            cause,
            effect_size: 1.5,
            threshold: 1.0,
            direction: Direction::AboveIsBad,
            kpi_level: 0.3,
            noise_sigma: 0.05,
            diurnal_amplitude: 0.15,
            cause_episodes: 2,
        }
    }

    pub fn n_columns(&self) -> usize {
        self.n_pm + self.n_fm + self.n_cm
    }

    /// Matrix column index of the injected cause.
    pub fn truth_index(&self) -> usize {
        match self.cause.kind {
            ColumnKind::Pm => self.cause.ordinal,
            ColumnKind::Fm => self.n_pm + self.cause.ordinal,
            ColumnKind::Cm => self.n_pm + self.n_fm + self.cause.ordinal,
        }
    }

    fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidScenario(m));
        if self.n_pm == 0 {
            return invalid("the KPI needs at least one PM column".into());
        }
        let limit = match self.cause.kind {
            ColumnKind::Pm => self.n_pm,
            ColumnKind::Fm => self.n_fm,
            ColumnKind::Cm => self.n_cm,
        };
        if self.cause.ordinal >= limit {
            return invalid(format!("cause {:?} does not exist", self.cause));
        }
        if self.cause.kind == ColumnKind::Pm && self.cause.ordinal == 0 {
            return invalid("the KPI cannot be its own cause".into());
        }
        if self.cause_episodes == 0 {
            return invalid("at least one cause episode is needed".into());
        }
        if !(self.noise_sigma >= 0.0 && self.diurnal_amplitude >= 0.0) {
            return invalid("noise and amplitude must be non-negative".into());
        }
        let crosses = match self.direction {
            Direction::AboveIsBad => {
                self.kpi_level - self.diurnal_amplitude + self.effect_size > self.threshold
            }
            Direction::BelowIsBad => {
                self.kpi_level + self.diurnal_amplitude - self.effect_size < self.threshold
            }
        };
        if !(self.effect_size > 0.0) || !crosses {
            return invalid(format!(
                "effect size {} cannot push the KPI past its threshold {}",
                self.effect_size, self.threshold
            ));
        }
        Ok(())
    }

    fn rows_per_day(&self) -> usize {
        (DAY_MS / self.grid.delta_t()).max(1) as usize
    }

    fn hour_of_row(&self, row: usize) -> f64 {
        let t = self.grid.bin_start(row);
        (t.rem_euclid(DAY_MS)) as f64 / HOUR_MS as f64
    }

    /// Daily shape in `[-1, 1]` peaking at [`BUSY_HOUR`].
    fn diurnal(&self, row: usize) -> f64 {
        let phase = (self.hour_of_row(row) - BUSY_HOUR as f64 + 6.0) / 24.0;
        (std::f64::consts::TAU * phase).sin()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub scenario: SynthScenario,
    pub matrix: DesignMatrix,
    pub truth: usize,
    pub kpi_spec: KpiSpec,
    /// Bins where the injected cause is active.
    pub cause_active: Vec<bool>,
    pub pm: Vec<PmSeries>,
    pub fm_events: Vec<(String, FmEvent)>,
    pub cm_events: Vec<(String, CmEvent)>,
    pub pm_csv: String,
    pub fm_csv: String,
    pub cm_csv: String,
}

impl SynthOutput {
    pub fn truth_name(&self) -> &str {
        &self.matrix.column(self.truth).name
    }

    pub fn allow_all_filter(&self) -> CausalityFilter {
        CausalityFilter::allow_all(self.matrix.n_columns(), self.kpi_spec.column_index)
            .expect("KPI column is in range")
    }

    /// Expert view of this station: faults and configuration changes may
    /// cause the KPI to degrade, the generic traffic counters may not. A PM
    /// cause is admitted alongside the event columns.
    pub fn expert_filter(&self) -> CausalityFilter {
        let mask = self
            .matrix
            .columns()
            .iter()
            .enumerate()
            .map(|(i, c)| c.kind != ColumnKind::Pm || (i == self.truth && self.scenario.cause.kind == ColumnKind::Pm))
            .collect();
        CausalityFilter::from_mask(mask, self.kpi_spec.column_index).expect("KPI column is in range")
    }

    /// One row per full day, taken at the busy hour, on a grid whose period
    /// is one day.
    pub fn busy_hour_view(&self) -> Result<DesignMatrix> {
        let s = &self.scenario;
        let per_day = s.rows_per_day();
        let days = s.grid.rows() / per_day;
        let offset = (0..per_day)
            .find(|&r| s.hour_of_row(r) as i64 == BUSY_HOUR)
            .unwrap_or(0);
        if days == 0 {
            return Err(Error::InvalidScenario("window is shorter than one day".into()));
        }
        let rows: Vec<usize> = (0..days).map(|d| d * per_day + offset).collect();
        let period = per_day as i64 * s.grid.delta_t();
        let grid = TimeGrid::new(s.grid.bin_start(offset), period, days as i64 * period)?;
        self.matrix.select_rows(&rows, grid)
    }
}

fn random_episodes(rng: &mut ChaCha8Rng, rows: usize, count: usize, len: (usize, usize)) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let l = rng.random_range(len.0..=len.1).min(rows);
        let start = rng.random_range(0..=rows - l);
        out.push((start, start + l));
    }
    out
}

/// Timestamp somewhere inside bin `row`, or exactly the window end for the
/// sentinel row.
fn time_in_bin(rng: &mut ChaCha8Rng, grid: &TimeGrid, row: usize) -> Timestamp {
    if row >= grid.rows() {
        return grid.window_end();
    }
    let lo = grid.bin_start(row);
    let hi = grid.bin_start(row + 1).min(grid.window_end());
    rng.random_range(lo..hi)
}

fn spans_for(rng: &mut ChaCha8Rng, grid: &TimeGrid, episodes: &[(usize, usize)], allow_open: bool) -> Vec<EventSpan> {
    episodes
        .iter()
        .map(|&(s, e)| {
            let start = time_in_bin(rng, grid, s);
            let end = if e >= grid.rows() && allow_open && rng.random_bool(0.5) {
                None
            } else {
                Some(time_in_bin(rng, grid, e))
            };
            EventSpan { start, end }
        })
        .collect()
}

pub fn generate(scenario: &SynthScenario) -> Result<SynthOutput> {
    scenario.validate()?;
    let s = scenario;
    let grid = s.grid;
    let m = grid.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let noise = Normal::new(0.0, s.noise_sigma).map_err(|e| Error::InvalidScenario(e.to_string()))?;

    let max_len = (m / 12).clamp(1, 8);
    let cause_episodes = random_episodes(&mut rng, m, s.cause_episodes, (max_len.div_ceil(2), max_len));
    let mut cause_active = vec![false; m];
    for &(a, b) in &cause_episodes {
        cause_active[a..b].iter_mut().for_each(|x| *x = true);
    }
    let shift = match s.direction {
        Direction::AboveIsBad => s.effect_size,
        Direction::BelowIsBad => -s.effect_size,
    };

    let mut pm = Vec::with_capacity(s.n_pm);
    let kpi: Vec<f64> = (0..m)
        .map(|r| {
            let base = s.kpi_level + s.diurnal_amplitude * s.diurnal(r) + noise.sample(&mut rng);
            if cause_active[r] {
                base + shift
            } else {
                base
            }
        })
        .collect();
    pm.push(PmSeries::new(KPI_NAME, PmKind::Kpi, kpi));
    for c in 1..s.n_pm {
        let level = rng.random_range(50.0..500.0);
        let swing = level * rng.random_range(0.1..0.4);
        let sigma = level * 0.05;
        let is_cause = s.cause.kind == ColumnKind::Pm && s.cause.ordinal == c;
        let values = (0..m)
            .map(|r| {
                let v = level + swing * s.diurnal(r) + sigma * noise_unit(&mut rng);
                // a faulty counter reads erratically while the cause is active
                if is_cause && cause_active[r] {
                    v + swing * rng.random_range(4.0..40.0)
                } else {
                    v
                }
            })
            .collect();
        pm.push(PmSeries::new(format!("counter_{c:02}"), PmKind::Counter, values));
    }

    let decoy_len = (1, (m / 10).clamp(1, 10));
    let mut fm_series = Vec::with_capacity(s.n_fm);
    let mut fm_events = Vec::new();
    for a in 0..s.n_fm {
        let id = format!("alarm_{a:02}");
        let episodes = if s.cause.kind == ColumnKind::Fm && s.cause.ordinal == a {
            cause_episodes.clone()
        } else {
            let n = rng.random_range(1..=3);
            random_episodes(&mut rng, m, n, decoy_len)
        };
        let spans = spans_for(&mut rng, &grid, &episodes, true);
        for sp in &spans {
            fm_events.push((
                s.bs_id.clone(),
                FmEvent {
                    alarm_id: id.clone(),
                    raised_at: sp.start,
                    cleared_at: sp.end,
                },
            ));
        }
        fm_series.push(EventSeries::new(id, spans));
    }

    let mut cm_series = Vec::with_capacity(s.n_cm);
    let mut cm_events = Vec::new();
    for p in 0..s.n_cm {
        let id = format!("param_{p:02}");
        let episodes = if s.cause.kind == ColumnKind::Cm && s.cause.ordinal == p {
            cause_episodes.clone()
        } else {
            let n = rng.random_range(1..=2);
            random_episodes(&mut rng, m, n, decoy_len)
        };
        let spans = spans_for(&mut rng, &grid, &episodes, true);
        for sp in &spans {
            let old = rng.random_range(0..10);
            cm_events.push((
                s.bs_id.clone(),
                CmEvent {
                    param_id: id.clone(),
                    old_value: old.to_string(),
                    new_value: (old + rng.random_range(1..5)).to_string(),
                    changed_at: sp.start,
                    reverted_at: sp.end,
                },
            ));
        }
        cm_series.push(EventSeries::new(id, spans));
    }

    let matrix = build_design_matrix(&pm, &fm_series, &cm_series, &grid)?;
    let mut pm_csv = Vec::new();
    write_pm_csv(&mut pm_csv, &grid, &s.bs_id, &pm)?;
    let mut fm_csv = Vec::new();
    write_fm_csv(&mut fm_csv, &fm_events)?;
    let mut cm_csv = Vec::new();
    write_cm_csv(&mut cm_csv, &cm_events)?;

    Ok(SynthOutput {
        scenario: s.clone(),
        truth: s.truth_index(),
        kpi_spec: KpiSpec::new(0, s.threshold, s.direction)?,
        matrix,
        cause_active,
        pm,
        fm_events,
        cm_events,
        pm_csv: String::from_utf8(pm_csv).expect("csv is utf-8"),
        fm_csv: String::from_utf8(fm_csv).expect("csv is utf-8"),
        cm_csv: String::from_utf8(cm_csv).expect("csv is utf-8"),
    })
}

fn noise_unit(rng: &mut ChaCha8Rng) -> f64 {
    rand_distr::StandardNormal.sample(rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationshipKind {
    /// Uplink SINR (linear) against spectral efficiency below the Shannon bound.
    Shannon,
    /// Active users against downlink volume, heteroscedastic, with gaps.
    TrafficUsers,
}

impl fmt::Display for RelationshipKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelationshipKind::Shannon => "shannon",
            RelationshipKind::TrafficUsers => "traffic_users",
        })
    }
}

impl FromStr for RelationshipKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shannon" => Ok(RelationshipKind::Shannon),
            "traffic_users" | "traffic-users" => Ok(RelationshipKind::TrafficUsers),
            _ => Err(Error::InvalidParameter(format!("unknown relationship kind `{s}`"))),
        }
    }
}

/// Shannon capacity in bit/s/Hz for a linear SINR.
pub fn shannon_bound(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

/// Users never observed in the traffic relationship.
pub const USER_GAP: std::ops::RangeInclusive<u32> = 25..=29;
pub const MAX_USERS: u32 = 40;

/// Feature pair `(p_x, p_y)` with `m` samples.
pub fn generate_relationship(kind: RelationshipKind, m: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(m);
    let mut ys = Vec::with_capacity(m);
    match kind {
        RelationshipKind::Shannon => {
            for _ in 0..m {
                let sinr_db: f64 = rng.random_range(-5.0..30.0);
                let sinr = 10f64.powf(sinr_db / 10.0);
                // efficiency in (0, 1]
                let efficiency = 1.0 - 0.8 * rng.random::<f64>();
                xs.push(sinr);
                ys.push(shannon_bound(sinr) * efficiency);
            }
        }
        RelationshipKind::TrafficUsers => {
            for i in 0..m {
                // a handful of samples at the busiest load, none in the gap
                let users = if i % 200 == 199 {
                    MAX_USERS
                } else {
                    loop {
                        let u = rng.random_range(0..MAX_USERS);
                        if !USER_GAP.contains(&u) {
                            break u;
                        }
                    }
                };
                let mean = 3.0 * f64::from(users).powf(0.8);
                let spread = 0.2 + 0.05 * f64::from(users);
                let volume = (mean * (1.0 + spread * noise_unit(&mut rng))).max(0.0);
                xs.push(f64::from(users));
                ys.push(volume);
            }
        }
    }
    (xs, ys)
}
