//! Run-time scaling measurements for both pipelines.

use std::io::Write;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::rca::{diagnose, RcaParams};
use crate::reldisc::{discover, RelDiscParams};
use crate::synth::{generate, generate_relationship, RelationshipKind, SynthScenario, HOUR_MS};
use crate::telemetry::TimeGrid;

/// Each timing sample repeats the workload until at least this much time has
/// passed, so short workloads are not dominated by timer resolution.
const MIN_SAMPLE: Duration = Duration::from_millis(20);
pub const DEFAULT_REPETITIONS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchPoint {
    pub size: usize,
    /// Median seconds per run.
    pub seconds: f64,
    /// Seconds per run for each repetition.
    pub samples: Vec<f64>,
}

impl BenchPoint {
    /// Standard deviation over mean of the repetitions.
    pub fn coefficient_of_variation(&self) -> f64 {
        let n = self.samples.len() as f64;
        let mean = self.samples.iter().sum::<f64>() / n;
        let var = self.samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        var.sqrt() / mean
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn fit_linear(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidParameter("a fit needs at least two paired points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("x values are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(LinearFit { slope, intercept, r2 })
}

/// Fit of `ln(seconds)` against `ln(size)`; the slope is the growth exponent.
pub fn fit_loglog(points: &[BenchPoint]) -> Result<LinearFit> {
    let xs: Vec<f64> = points.iter().map(|p| (p.size as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.seconds.ln()).collect();
    fit_linear(&xs, &ys)
}

pub fn fit_points(points: &[BenchPoint]) -> Result<LinearFit> {
    let xs: Vec<f64> = points.iter().map(|p| p.size as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.seconds).collect();
    fit_linear(&xs, &ys)
}

fn measure<F: FnMut() -> Result<()>>(size: usize, repetitions: usize, mut run: F) -> Result<BenchPoint> {
    // warm-up, and calibrate how many runs make one sample
    let start = Instant::now();
    run()?;
    let once = start.elapsed().max(Duration::from_nanos(1));
    let batch = (MIN_SAMPLE.as_secs_f64() / once.as_secs_f64()).ceil().max(1.0) as usize;

    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        for _ in 0..batch {
            run()?;
        }
        samples.push(start.elapsed().as_secs_f64() / batch as f64);
    }
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(BenchPoint {
        size,
        seconds: sorted[sorted.len() / 2],
        samples,
    })
}

fn single_thread<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(pool.install(f))
}

fn check_sizes(sizes: &[usize], repetitions: usize) -> Result<()> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] == 0 {
        return Err(Error::InvalidParameter("sizes must be positive and strictly ascending".into()));
    }
    if repetitions == 0 {
        return Err(Error::InvalidParameter("need at least one repetition".into()));
    }
    Ok(())
}

/// Diagnosis time against the number of columns `n` at a fixed row count.
/// Runs on one thread so the measurement reflects the algorithm.
pub fn bench_rca_vs_n(sizes: &[usize], rows: usize, repetitions: usize, seed: u64) -> Result<Vec<BenchPoint>> {
    check_sizes(sizes, repetitions)?;
    let grid = TimeGrid::new(crate::synth::DEFAULT_WINDOW_START, HOUR_MS, rows as i64 * HOUR_MS)?;
    sizes
        .iter()
        .map(|&n| {
            if n < 3 {
                return Err(Error::InvalidParameter("rca benchmark needs n >= 3".into()));
            }
            let mut s = SynthScenario::with_seed(seed);
            s.grid = grid;
            s.n_pm = n / 2;
            s.n_fm = (n - s.n_pm) / 2;
            s.n_cm = n - s.n_pm - s.n_fm;
            s.cause.kind = crate::telemetry::ColumnKind::Fm;
            s.cause.ordinal = 0;
            let out = generate(&s)?;
            let filter = out.allow_all_filter();
            let params = RcaParams::default();
            single_thread(|| {
                measure(n, repetitions, || {
                    diagnose(&out.matrix, &out.kpi_spec, &filter, &params).map(|_| ())
                })
            })?
        })
        .collect()
}

/// Relationship-discovery time against the number of samples `m`.
pub fn bench_reldisc_vs_m(
    sizes: &[usize],
    params: &RelDiscParams,
    repetitions: usize,
    seed: u64,
) -> Result<Vec<BenchPoint>> {
    check_sizes(sizes, repetitions)?;
    sizes
        .iter()
        .map(|&m| {
            let (x, y) = generate_relationship(RelationshipKind::Shannon, m, seed);
            measure(m, repetitions, || discover(&x, &y, params).map(|_| ()))
        })
        .collect()
}

/// Writes `size,seconds`.
pub fn write_timings_csv<W: Write>(writer: W, points: &[BenchPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["size", "seconds"])?;
    for p in points {
        w.write_record([p.size.to_string(), format!("{:.9}", p.seconds)])?;
    }
    w.flush()?;
    Ok(())
}
