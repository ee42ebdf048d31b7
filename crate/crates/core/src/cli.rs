//! Command-line front end.
//!
//! Exit codes: 0 success, 1 output failure, 2 input error, 3 no root cause.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::bench::{
    bench_rca_vs_n, bench_reldisc_vs_m, fit_loglog, fit_points, write_timings_csv, BenchPoint,
    DEFAULT_REPETITIONS,
};
use crate::cluster::KmeansMode;
use crate::error::Error;
use crate::rca::{
    diagnose, CausalityFilter, Direction, KpiSpec, RcaParams, DEFAULT_EPSILON_GRID,
    DEFAULT_MIN_PTS, DEFAULT_THRESHOLD,
};
use crate::reldisc::{
    discover, write_lookup_csv, Aggregate, Imputation, PlotData, RelDiscParams, Smoothing,
    DEFAULT_GAMMA, DEFAULT_K, DEFAULT_SMOOTH_WINDOW,
};
use crate::synth::{
    generate, generate_relationship, RelationshipKind, SynthScenario, DEFAULT_WINDOW_START,
    HOUR_MS,
};
use crate::telemetry::io::{
    group_events, parse_duration_ms, parse_timestamp, read_cm_csv, read_fm_csv, read_matrix_csv,
    read_pm_csv, write_matrix_csv, write_pm_csv, Manifest,
};
use crate::telemetry::{build_design_matrix, CmEvent, ColumnKind, DesignMatrix, FmEvent, PmKind, PmSeries, TimeGrid};

pub const EXIT_OUTPUT: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NO_CAUSE: u8 = 3;

/// Environment variable capping worker threads (0 = one per core).
pub const THREADS_ENV: &str = "RIC_DIAG_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ric-diag", version, about = "Base-station telemetry self-diagnosis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fuse PM/FM/CM exports into one design matrix per base station.
    BuildMatrix(BuildMatrixArgs),
    /// Find the root cause of a degraded KPI.
    Rca(RcaArgs),
    /// Learn a lookup table relating two PM columns.
    Reldisc(ReldiscArgs),
    /// Measure run-time scaling.
    Bench(BenchArgs),
    /// Write synthetic input files.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct BuildMatrixArgs {
    #[arg(long)]
    pub pm: PathBuf,
    #[arg(long)]
    pub fm: Option<PathBuf>,
    #[arg(long)]
    pub cm: Option<PathBuf>,
    /// Window start (epoch ms or ISO-8601); defaults to the first PM report.
    #[arg(long)]
    pub window_start: Option<String>,
    /// Periodicity, e.g. `1h` or milliseconds.
    #[arg(long, default_value = "1h")]
    pub delta_t: String,
    /// Window length, e.g. `5days`; defaults to span of the PM reports.
    #[arg(long)]
    pub window: Option<String>,
    /// Only build this base station.
    #[arg(long)]
    pub bs: Option<String>,
    /// Output directory for `<bs>.csv` and `<bs>.manifest.json`.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct RcaArgs {
    /// Matrix CSV; its manifest is read from `<stem>.manifest.json`.
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub kpi: String,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value_t = DirectionArg::AboveIsBad)]
    pub direction: DirectionArg,
    /// Causality filter CSV `kpi_name,column_name,allowed`.
    #[arg(long)]
    pub filter: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_EPSILON_GRID.to_vec())]
    pub epsilon_grid: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_MIN_PTS)]
    pub min_pts: usize,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    AboveIsBad,
    BelowIsBad,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::AboveIsBad => Direction::AboveIsBad,
            DirectionArg::BelowIsBad => Direction::BelowIsBad,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AggregateArg {
    Max,
    Average,
}

impl From<AggregateArg> for Aggregate {
    fn from(a: AggregateArg) -> Self {
        match a {
            AggregateArg::Max => Aggregate::Max,
            AggregateArg::Average => Aggregate::Average,
        }
    }
}

#[derive(Debug, Args)]
pub struct ReldiscArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Independent variable.
    #[arg(long)]
    pub x_col: String,
    /// Target variable.
    #[arg(long)]
    pub y_col: String,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = AggregateArg::Average)]
    pub aggregate: AggregateArg,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: usize,
    /// Odd moving-average window; 0 disables smoothing.
    #[arg(long, default_value_t = DEFAULT_SMOOTH_WINDOW)]
    pub smooth_window: usize,
    /// Leave empty clusters as NaN instead of carrying the last value.
    #[arg(long)]
    pub no_impute: bool,
    /// Move centroids with Lloyd iterations instead of keeping them fixed.
    #[arg(long)]
    pub lloyd: bool,
    /// Lookup CSV; the imputed table goes next to it as `<stem>.imputed.csv`.
    #[arg(long)]
    pub output: PathBuf,
    /// Optional plot-data JSON.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BenchMode {
    RcaVsN,
    ReldiscVsM,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub mode: BenchMode,
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    /// Matrix rows for `rca-vs-n`.
    #[arg(long, default_value_t = 120)]
    pub rows: usize,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_REPETITIONS)]
    pub repetitions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SynthKind {
    Rca,
    Shannon,
    TrafficUsers,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value_t = SynthKind::Rca)]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hourly rows for `rca`, samples for the relationship kinds.
    #[arg(long)]
    pub rows: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn output(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError {
            code: EXIT_OUTPUT,
            message: format!("{}: {err}", path.display()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::input(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let result = match cli.command {
        Command::BuildMatrix(a) => cmd_build_matrix(&a),
        Command::Rca(a) => cmd_rca(&a),
        Command::Reldisc(a) => cmd_reldisc(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Synth(a) => cmd_synth(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

/// Applies the thread cap from [`THREADS_ENV`].
pub fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::input(format!("{THREADS_ENV} must be a non-negative integer, got `{raw}`")))?;
    if n > 0 {
        // fails only when a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::input(format!("{}: no such file", path.display())))
    }
}

fn require_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => {
            Err(CliError::input(format!("{}: output directory does not exist", p.display())))
        }
        _ => Ok(()),
    }
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::output(path, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::output(path, e))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

/// `<stem>.manifest.json` beside a matrix CSV.
pub fn manifest_path(matrix: &Path) -> PathBuf {
    with_suffix(matrix, ".manifest.json")
}

fn file_safe(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

fn load_matrix(matrix: &Path, manifest: Option<&Path>) -> CliResult<DesignMatrix> {
    let manifest_file = manifest.map(Path::to_path_buf).unwrap_or_else(|| manifest_path(matrix));
    require_file(matrix)?;
    require_file(&manifest_file)?;
    let manifest: Manifest = serde_json::from_reader(open(&manifest_file)?)
        .map_err(|e| CliError::input(format!("{}: {e}", manifest_file.display())))?;
    Ok(read_matrix_csv(open(matrix)?, &manifest, &matrix.display().to_string())?)
}

pub fn cmd_build_matrix(a: &BuildMatrixArgs) -> CliResult<u8> {
    require_file(&a.pm)?;
    for p in [&a.fm, &a.cm].into_iter().flatten() {
        require_file(p)?;
    }
    if !a.output.is_dir() {
        return Err(CliError::input(format!("{}: output directory does not exist", a.output.display())));
    }
    let delta_t = parse_duration_ms(&a.delta_t)
        .ok_or_else(|| CliError::input(format!("malformed --delta-t `{}`", a.delta_t)))?;

    let pm_name = a.pm.display().to_string();
    let pm = read_pm_csv(open(&a.pm)?, &pm_name)?;
    let fm = match &a.fm {
        Some(p) => read_fm_csv(open(p)?, &p.display().to_string())?,
        None => Vec::new(),
    };
    let cm = match &a.cm {
        Some(p) => read_cm_csv(open(p)?, &p.display().to_string())?,
        None => Vec::new(),
    };

    let (first, last) = pm
        .time_span()
        .ok_or_else(|| CliError::input(format!("{pm_name}: no PM reports")))?;
    let start = match &a.window_start {
        Some(s) => parse_timestamp(s).ok_or_else(|| CliError::input(format!("malformed --window-start `{s}`")))?,
        None => first,
    };
    let window = match &a.window {
        Some(w) => parse_duration_ms(w).ok_or_else(|| CliError::input(format!("malformed --window `{w}`")))?,
        None => last - start + delta_t,
    };
    let grid = TimeGrid::new(start, delta_t, window)?;

    let mut stations = pm.bs_ids();
    if let Some(bs) = &a.bs {
        if !stations.contains(bs) {
            return Err(CliError::input(format!("{pm_name}: no PM reports for bs `{bs}`")));
        }
        stations = vec![bs.clone()];
    }
    stations.sort();

    let built = stations
        .par_iter()
        .map(|bs| {
            let series = pm.series_for(bs, &grid, &pm_name)?;
            let fm_series = group_events(&fm, bs, |e: &FmEvent| &e.alarm_id);
            let cm_series = group_events(&cm, bs, |e: &CmEvent| &e.param_id);
            build_design_matrix(&series, &fm_series, &cm_series, &grid)
        })
        .collect::<Result<Vec<_>, Error>>()?;

    for (bs, matrix) in stations.iter().zip(&built) {
        let csv_path = a.output.join(format!("{}.csv", file_safe(bs)));
        let mut w = create(&csv_path)?;
        write_matrix_csv(&mut w, matrix).map_err(|e| CliError::output(&csv_path, e))?;
        w.flush().map_err(|e| CliError::output(&csv_path, e))?;
        let manifest = Manifest::for_matrix(matrix, Some(bs));
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_text(&manifest_path(&csv_path), &(json + "\n"))?;
        println!(
            "{bs}: m={} n={} r={} p={} q={} -> {}",
            matrix.rows(),
            matrix.n_columns(),
            matrix.count_kind(ColumnKind::Pm),
            matrix.count_kind(ColumnKind::Fm),
            matrix.count_kind(ColumnKind::Cm),
            csv_path.display()
        );
    }
    Ok(0)
}

pub fn cmd_rca(a: &RcaArgs) -> CliResult<u8> {
    if let Some(f) = &a.filter {
        require_file(f)?;
    }
    if let Some(o) = &a.output {
        require_parent(o)?;
    }
    let matrix = load_matrix(&a.matrix, a.manifest.as_deref())?;
    let v = matrix
        .column_index(&a.kpi)
        .ok_or_else(|| CliError::input(format!("unknown KPI column `{}`", a.kpi)))?;
    let spec = KpiSpec::new(v, a.threshold, a.direction.into())?;
    let filter = match &a.filter {
        Some(f) => CausalityFilter::read_csv(open(f)?, &f.display().to_string(), &matrix, v)?,
        None => CausalityFilter::allow_all(matrix.n_columns(), v)?,
    };
    let params = RcaParams {
        epsilon_grid: a.epsilon_grid.clone(),
        min_pts: a.min_pts,
    };
    let report = diagnose(&matrix, &spec, &filter, &params)?;
    let json = report.to_json()? + "\n";
    match &a.output {
        Some(o) => write_text(o, &json)?,
        None => print!("{json}"),
    }
    match &report.root_cause {
        Some(c) => {
            eprintln!("root cause of {}: {} (score {:.4})", report.kpi, c.column, report.score);
            Ok(0)
        }
        None => {
            eprintln!("no admissible column correlates with {} degradation", report.kpi);
            Ok(EXIT_NO_CAUSE)
        }
    }
}

pub fn cmd_reldisc(a: &ReldiscArgs) -> CliResult<u8> {
    require_parent(&a.output)?;
    if let Some(p) = &a.plot {
        require_parent(p)?;
    }
    let smoothing = match a.smooth_window {
        0 => Smoothing::None,
        w if w % 2 == 1 => Smoothing::MovingAverage(w),
        w => return Err(CliError::input(format!("--smooth-window must be odd, got {w}"))),
    };
    let matrix = load_matrix(&a.matrix, a.manifest.as_deref())?;
    let pm_column = |name: &str| -> CliResult<&[f64]> {
        let i = matrix
            .column_index(name)
            .ok_or_else(|| CliError::input(format!("unknown column `{name}`")))?;
        let col = matrix.column(i);
        if col.kind != ColumnKind::Pm {
            return Err(CliError::input(format!(
                "column `{name}` is {}; relationship discovery needs PM columns",
                col.kind
            )));
        }
        Ok(&col.values)
    };
    let x = pm_column(&a.x_col)?;
    let y = pm_column(&a.y_col)?;
    let params = RelDiscParams {
        k: a.k,
        aggregate: a.aggregate.into(),
        gamma: a.gamma,
        smoothing,
        imputation: if a.no_impute { Imputation::None } else { Imputation::ForwardFill },
        mode: if a.lloyd { KmeansMode::Lloyd } else { KmeansMode::Frozen },
    };
    let table = discover(x, y, &params)?;
    let missing = table.y.iter().filter(|v| v.is_nan()).count();
    if missing > 0 {
        eprintln!("{missing} clusters had <= {} samples and were imputed", a.gamma);
    }

    let imputed_path = with_suffix(&a.output, ".imputed.csv");
    for (path, imputed) in [(&a.output, false), (&imputed_path, true)] {
        let mut w = create(path)?;
        write_lookup_csv(&mut w, &table, imputed).map_err(|e| CliError::output(path, e))?;
        w.flush().map_err(|e| CliError::output(path, e))?;
    }
    if let Some(p) = &a.plot {
        let plot = PlotData::new(&table, x, y);
        write_text(p, &(serde_json::to_string(&plot).expect("plot serializes") + "\n"))?;
    }
    println!("k={} rows={} -> {}", table.k(), table.counts.iter().sum::<usize>(), a.output.display());
    Ok(0)
}

fn print_fit(points: &[BenchPoint]) -> CliResult<()> {
    let linear = fit_points(points)?;
    let loglog = fit_loglog(points)?;
    println!(
        "linear fit: slope={:.6e} s/unit intercept={:.6e} s r2={:.4}",
        linear.slope, linear.intercept, linear.r2
    );
    println!("log-log exponent: {:.3} (r2={:.4})", loglog.slope, loglog.r2);
    for w in points.windows(2) {
        println!(
            "size {} -> {}: time x{:.2}",
            w[0].size,
            w[1].size,
            w[1].seconds / w[0].seconds
        );
    }
    for p in points {
        println!("size {}: median {:.6e} s, cv {:.3}", p.size, p.seconds, p.coefficient_of_variation());
    }
    Ok(())
}

pub fn cmd_bench(a: &BenchArgs) -> CliResult<u8> {
    require_parent(&a.output)?;
    if a.sizes.len() < 4 {
        return Err(CliError::input("--sizes needs at least 4 points"));
    }
    let points = match a.mode {
        BenchMode::RcaVsN => bench_rca_vs_n(&a.sizes, a.rows, a.repetitions, a.seed)?,
        BenchMode::ReldiscVsM => {
            let params = RelDiscParams {
                k: a.k,
                ..RelDiscParams::default()
            };
            bench_reldisc_vs_m(&a.sizes, &params, a.repetitions, a.seed)?
        }
    };
    let mut w = create(&a.output)?;
    write_timings_csv(&mut w, &points).map_err(|e| CliError::output(&a.output, e))?;
    w.flush().map_err(|e| CliError::output(&a.output, e))?;
    print_fit(&points)?;
    Ok(0)
}

#[derive(Serialize)]
struct TruthJson<'a> {
    seed: u64,
    kpi: &'a str,
    threshold: f64,
    direction: Direction,
    root_cause: &'a str,
    root_cause_index: usize,
}

pub fn cmd_synth(a: &SynthArgs) -> CliResult<u8> {
    if !a.output.is_dir() {
        return Err(CliError::input(format!("{}: output directory does not exist", a.output.display())));
    }
    match a.kind {
        SynthKind::Rca => {
            let mut s = SynthScenario::with_seed(a.seed);
            if let Some(rows) = a.rows {
                s.grid = TimeGrid::new(DEFAULT_WINDOW_START, HOUR_MS, rows as i64 * HOUR_MS)?;
            }
            let out = generate(&s)?;
            write_text(&a.output.join("pm.csv"), &out.pm_csv)?;
            write_text(&a.output.join("fm.csv"), &out.fm_csv)?;
            write_text(&a.output.join("cm.csv"), &out.cm_csv)?;
            let filter = out.expert_filter();
            let mut f = String::from("kpi_name,column_name,allowed\n");
            for (col, allowed) in out.matrix.columns().iter().zip(filter.mask()) {
                f.push_str(&format!("{},{},{}\n", crate::synth::KPI_NAME, col.name, u8::from(*allowed)));
            }
            write_text(&a.output.join("filter.csv"), &f)?;
            let truth = TruthJson {
                seed: a.seed,
                kpi: crate::synth::KPI_NAME,
                threshold: out.kpi_spec.threshold,
                direction: out.kpi_spec.direction,
                root_cause: out.truth_name(),
                root_cause_index: out.truth,
            };
            let json = serde_json::to_string_pretty(&truth).expect("truth serializes") + "\n";
            write_text(&a.output.join("truth.json"), &json)?;
            println!(
                "rows={} columns={} truth={} -> {}",
                out.matrix.rows(),
                out.matrix.n_columns(),
                out.truth_name(),
                a.output.display()
            );
        }
        SynthKind::Shannon | SynthKind::TrafficUsers => {
            let (kind, names) = match a.kind {
                SynthKind::Shannon => (RelationshipKind::Shannon, ["sinr", "se"]),
                _ => (RelationshipKind::TrafficUsers, ["users", "volume"]),
            };
            let m = a.rows.unwrap_or(30 * 24);
            if m == 0 {
                return Err(CliError::input("--rows must be positive"));
            }
            let (x, y) = generate_relationship(kind, m, a.seed);
            let grid = TimeGrid::new(DEFAULT_WINDOW_START, HOUR_MS, m as i64 * HOUR_MS)?;
            let series = [
                PmSeries::new(names[0], PmKind::Counter, x),
                PmSeries::new(names[1], PmKind::Kpi, y),
            ];
            let path = a.output.join("pm.csv");
            let mut w = create(&path)?;
            write_pm_csv(&mut w, &grid, "bs1", &series).map_err(|e| CliError::output(&path, e))?;
            w.flush().map_err(|e| CliError::output(&path, e))?;
            println!("{kind}: {m} samples -> {}", path.display());
        }
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_paths() {
        assert_eq!(manifest_path(Path::new("out/bs1.csv")), Path::new("out/bs1.manifest.json"));
        assert_eq!(with_suffix(Path::new("t.csv"), ".imputed.csv"), Path::new("t.imputed.csv"));
        assert_eq!(file_safe("bs/1 a"), "bs_1_a");
    }

    #[test]
    fn parses_flags() {
        let cli = Cli::try_parse_from([
            "ric-diag", "rca", "--matrix", "m.csv", "--kpi", "drop_rate", "--epsilon-grid", "0.2,0.4",
            "--direction", "below-is-bad",
        ])
        .unwrap();
        let Command::Rca(a) = cli.command else { panic!() };
        assert_eq!(a.epsilon_grid, [0.2, 0.4]);
        assert_eq!(a.min_pts, 5);
        assert!(matches!(a.direction, DirectionArg::BelowIsBad));

        let cli = Cli::try_parse_from(["ric-diag", "rca", "--matrix", "m.csv", "--kpi", "k"]).unwrap();
        let Command::Rca(a) = cli.command else { panic!() };
        assert_eq!(a.epsilon_grid, [0.1, 0.3, 0.5]);
    }
}
