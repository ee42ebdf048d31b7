use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_ric-diag");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Synthesizes a scenario and builds its matrix; returns the matrix path.
fn synth_matrix(dir: &Path, seed: u64) -> std::path::PathBuf {
    let seed = seed.to_string();
    let out = run(&["synth", "--seed", &seed, "--output", p(dir)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let mdir = dir.join("m");
    fs::create_dir(&mdir).unwrap();
    let out = run(&[
        "build-matrix",
        "--pm",
        p(&dir.join("pm.csv")),
        "--fm",
        p(&dir.join("fm.csv")),
        "--cm",
        p(&dir.join("cm.csv")),
        "--delta-t",
        "1h",
        "--output",
        p(&mdir),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    mdir.join("bs1.csv")
}

fn truth(dir: &Path) -> String {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("truth.json")).unwrap()).unwrap();
    v["root_cause"].as_str().unwrap().to_owned()
}

#[test]
fn synth_end_to_end_recovers_truth() {
    for seed in [1, 2, 3] {
        let dir = TempDir::new().unwrap();
        let matrix = synth_matrix(dir.path(), seed);
        let report = dir.path().join("report.json");
        let out = run(&[
            "rca",
            "--matrix",
            p(&matrix),
            "--kpi",
            "drop_rate",
            "--filter",
            p(&dir.path().join("filter.csv")),
            "--output",
            p(&report),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
        assert_eq!(v["root_cause"].as_str().unwrap(), truth(dir.path()));
        assert_eq!(v["window"]["rows"], 120);
    }
}

#[test]
fn masked_cause_is_never_reported() {
    let dir = TempDir::new().unwrap();
    let matrix = synth_matrix(dir.path(), 4);
    let cause = truth(dir.path());
    let filter = fs::read_to_string(dir.path().join("filter.csv"))
        .unwrap()
        .replace(&format!(",{cause},1"), &format!(",{cause},0"));
    let fpath = dir.path().join("masked.csv");
    fs::write(&fpath, filter).unwrap();
    let out = run(&["rca", "--matrix", p(&matrix), "--kpi", "drop_rate", "--filter", p(&fpath)]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_ne!(v["root_cause"].as_str(), Some(cause.as_str()));
    let ranked = v["ranking"].as_array().unwrap();
    let entry = ranked.iter().find(|e| e["column"] == cause.as_str()).unwrap();
    assert_eq!(entry["g"], 0.0);
}

#[test]
fn no_cause_exits_3() {
    let dir = TempDir::new().unwrap();
    let matrix = synth_matrix(dir.path(), 5);
    // nothing exceeds this threshold, so the KPI is never degraded
    let out = run(&["rca", "--matrix", p(&matrix), "--kpi", "drop_rate", "--threshold", "1000"]);
    assert_eq!(out.status.code(), Some(3));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["root_cause"].is_null());
}

#[test]
fn unknown_kpi_exits_2() {
    let dir = TempDir::new().unwrap();
    let matrix = synth_matrix(dir.path(), 6);
    let out = run(&["rca", "--matrix", p(&matrix), "--kpi", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nope"));
}

#[test]
fn malformed_timestamp_names_the_line() {
    let dir = TempDir::new().unwrap();
    let pm = dir.path().join("pm.csv");
    fs::write(
        &pm,
        "timestamp,bs_id,kpi\n1704067200000,bs1,0.1\nnot-a-time,bs1,0.2\n1704074400000,bs1,0.3\n",
    )
    .unwrap();
    let out = run(&["build-matrix", "--pm", p(&pm), "--delta-t", "1h", "--output", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains(":3:"), "{err}");
    assert!(err.contains("not-a-time"), "{err}");
}

#[test]
fn missing_input_is_rejected_before_work() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "build-matrix",
        "--pm",
        p(&dir.path().join("absent.csv")),
        "--output",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["synth", "--output", p(&dir.path().join("no/such/dir"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn build_matrix_splits_stations() {
    let dir = TempDir::new().unwrap();
    let pm = dir.path().join("pm.csv");
    fs::write(
        &pm,
        "timestamp,bs_id,kpi\n\
         2024-01-01T00:00:00Z,a,1\n2024-01-01T01:00:00Z,a,\n2024-01-01T02:00:00Z,a,3\n\
         2024-01-01T00:00:00Z,b,5\n2024-01-01T02:00:00Z,b,7\n",
    )
    .unwrap();
    let fm = dir.path().join("fm.csv");
    fs::write(
        &fm,
        "bs_id,alarm_id,raised_at,cleared_at\nb,x1,2024-01-01T01:10:00Z,2024-01-01T02:30:00Z\n",
    )
    .unwrap();
    let out = run(&["build-matrix", "--pm", p(&pm), "--fm", p(&fm), "--delta-t", "1h", "--output", p(dir.path())]);
    assert!(out.status.success(), "{}", stderr(&out));
    let a = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, "t_bin,kpi\n0,1\n1,1\n2,3\n");
    let b = fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(b, "t_bin,kpi,x1\n0,5,0\n1,5,1\n2,7,0\n");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("b: m=3 n=2 r=1 p=1 q=0"), "{stdout}");
}

fn relationship_matrix(dir: &Path, rows: &str) -> std::path::PathBuf {
    let out = run(&["synth", "--kind", "traffic-users", "--rows", rows, "--seed", "2", "--output", p(dir)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = run(&["build-matrix", "--pm", p(&dir.join("pm.csv")), "--delta-t", "1h", "--output", p(dir)]);
    assert!(out.status.success(), "{}", stderr(&out));
    dir.join("bs1.csv")
}

#[test]
fn reldisc_warns_and_imputes() {
    let dir = TempDir::new().unwrap();
    let matrix = relationship_matrix(dir.path(), "3000");
    let table = dir.path().join("table.csv");
    let plot = dir.path().join("plot.json");
    let out = run(&[
        "reldisc", "--matrix", p(&matrix), "--x-col", "users", "--y-col", "volume", "--output", p(&table), "--plot",
        p(&plot),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("pigeonholed"), "{}", stderr(&out));

    let raw = fs::read_to_string(&table).unwrap();
    let imputed = fs::read_to_string(dir.path().join("table.imputed.csv")).unwrap();
    let mut raw_rdr = csv::Reader::from_reader(raw.as_bytes());
    let mut imp_rdr = csv::Reader::from_reader(imputed.as_bytes());
    let mut gaps = 0;
    let mut last = None;
    for (r, i) in raw_rdr.records().zip(imp_rdr.records()) {
        let (r, i) = (r.unwrap(), i.unwrap());
        let count: usize = r[3].parse().unwrap();
        if count <= 100 {
            gaps += 1;
            assert_eq!(&r[1], "");
            if let Some(prev) = &last {
                assert_eq!(&i[1], prev);
            }
        } else {
            assert_eq!(&r[1], &i[1]);
        }
        if !i[1].is_empty() {
            last = Some(i[1].to_owned());
        }
    }
    assert!(gaps > 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&plot).unwrap()).unwrap();
    assert_eq!(v["x"].as_array().unwrap().len(), 30);
}

#[test]
fn reldisc_rejects_event_columns() {
    let dir = TempDir::new().unwrap();
    let matrix = synth_matrix(dir.path(), 8);
    let out = run(&[
        "reldisc", "--matrix", p(&matrix), "--x-col", "alarm_00", "--y-col", "drop_rate", "--output",
        p(&dir.path().join("t.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("PM"), "{}", stderr(&out));
    let out = run(&[
        "reldisc", "--matrix", p(&matrix), "--x-col", "counter_01", "--y-col", "drop_rate", "--smooth-window", "4",
        "--output", p(&dir.path().join("t.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_writes_timings() {
    let dir = TempDir::new().unwrap();
    let csv_path = dir.path().join("t.csv");
    let out = run(&[
        "bench", "--mode", "reldisc-vs-m", "--sizes", "100,200,400,800", "--repetitions", "1", "--output",
        p(&csv_path),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&csv_path).unwrap();
    assert!(text.starts_with("size,seconds\n100,"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("log-log exponent"));
    let out = run(&["bench", "--mode", "rca-vs-n", "--sizes", "10,20", "--output", p(&csv_path)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_cap_is_validated() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(BIN)
        .args(["synth", "--output", p(dir.path())])
        .env("RIC_DIAG_THREADS", "two")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(BIN)
        .args(["synth", "--output", p(dir.path())])
        .env("RIC_DIAG_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
}
