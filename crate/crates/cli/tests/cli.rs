use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nsdde(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsdde"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const CONVERGE: &[&str] = &[
    "converge",
    "--model",
    "example-b",
    "--tau",
    "1",
    "--T",
    "2",
    "--levels",
    "8,16,32",
    "--ref",
    "512",
    "--epsilon",
    "0.05",
    "--q",
    "2",
    "--paths",
    "100",
    "--seed",
    "7",
];

#[test]
fn list_models_prints_registry() {
    let o = Command::new(env!("CARGO_BIN_EXE_nsdde"))
        .arg("list-models")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let ids: Vec<&str> = text
        .lines()
        .map(|l| l.split('\t').next().unwrap())
        .collect();
    assert!(ids.contains(&"example-a"));
    assert!(ids.contains(&"example-b"));
    assert_eq!(ids.len(), nsdde_cli::MODELS.len());
}

#[test]
fn converge_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(nsdde(CONVERGE, &a).status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_nsdde"))
        .args(CONVERGE)
        .arg("--out")
        .arg(&b)
        .env("NSDDE_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["converge.csv", "rate.csv"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn converge_rows_echo_metadata() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(nsdde(CONVERGE, dir.path()).status.code(), Some(0));
    let mut rdr = csv::Reader::from_path(dir.path().join("converge.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "level",
            "m",
            "delta",
            "g_delta",
            "radius",
            "n_samples",
            "mode",
            "q",
            "error_moment",
            "root_error",
            "std_err",
            "seed"
        ]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    for row in &rows {
        let m: f64 = row[1].parse().unwrap();
        let delta: f64 = row[2].parse().unwrap();
        let g: f64 = row[3].parse().unwrap();
        let r: f64 = row[4].parse().unwrap();
        assert_eq!(delta, 1.0 / m);
        assert!((g - delta.powf(-0.05)).abs() < 1e-15);
        // r solves 1 + r + r³ = g for these small gauges.
        assert!((1.0 + r + r * r * r - g).abs() < 1e-11);
        assert_eq!(&row[11], "7");
    }
    let root: Vec<f64> = rows[..3].iter().map(|r| r[9].parse().unwrap()).collect();
    assert!(root[0] > root[1] && root[1] > root[2], "{root:?}");
    let rate = fs::read_to_string(dir.path().join("rate.csv")).unwrap();
    assert!(rate.starts_with("slope,ci_lo,ci_hi,r2\n"));
}

#[test]
fn inadmissible_gauge_exits_one_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut args = CONVERGE.to_vec();
    let i = args.iter().position(|a| *a == "0.05").unwrap();
    args[i] = "0.5";
    let o = nsdde(&args, &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Δ^{1/4}·g(Δ) ≤ 1"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cases: [&[&str]; 6] = [
        &["simulate", "--model", "example-b", "--m", "4", "--T", "1.3"],
        &["simulate", "--model", "nope", "--m", "4"],
        &[
            "simulate",
            "--model",
            "example-b",
            "--m",
            "4",
            "--driver",
            "jump",
        ],
        &["simulate", "--model", "example-a", "--a", "1.5", "--m", "4"],
        &[
            "converge",
            "--model",
            "example-b",
            "--levels",
            "8,12",
            "--ref",
            "64",
            "--epsilon",
            "0.05",
        ],
        &[
            "check-assumptions",
            "--model",
            "example-b",
            "--assumptions",
            "A9",
        ],
    ];
    for args in cases {
        let o = nsdde(args, &out);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(!out.exists(), "{args:?}");
    }
    let o = Command::new(env!("CARGO_BIN_EXE_nsdde"))
        .args(["converge", "--bogus"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn blowup_exits_two_and_marks_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = nsdde(
        &[
            "simulate",
            "--model",
            "example-b",
            "--m",
            "4",
            "--untruncated",
            "--xi",
            "10",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("blow-up"));
    assert!(dir.path().join("simulate.csv.failed").exists());
    assert!(!dir.path().join("simulate.csv").exists());
}

#[test]
fn zero_errors_are_not_fittable() {
    let dir = tempfile::tempdir().unwrap();
    let o = nsdde(
        &[
            "converge",
            "--model",
            "additive",
            "--levels",
            "8,16",
            "--ref",
            "128",
            "--epsilon",
            "0.1",
            "--paths",
            "10",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not fittable"));
    assert!(dir.path().join("converge.csv.failed").exists());
    assert!(!dir.path().join("converge.csv").exists());
    assert!(!dir.path().join("rate.csv").exists());
}

#[test]
fn simulate_writes_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = nsdde(
        &[
            "simulate",
            "--model",
            "jump-neutral",
            "--m",
            "8",
            "--T",
            "1",
            "--paths",
            "3",
            "--seed",
            "11",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(dir.path().join("simulate.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "path",
            "k",
            "t",
            "y0",
            "jumps_in_interval",
            "delta",
            "g_delta",
            "radius",
            "seed"
        ]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    // k runs from −m to T/Δ.
    assert_eq!(rows.len(), 3 * (8 + 8 + 1));
    for row in &rows {
        let k: i64 = row[1].parse().unwrap();
        let t: f64 = row[2].parse().unwrap();
        assert!((t - k as f64 / 8.0).abs() < 1e-15);
        if k <= 0 {
            assert_eq!(&row[3], "1.0000000000000000e0");
            assert_eq!(&row[4], "0");
        }
        assert_eq!(&row[8], "11");
    }
}

#[test]
fn check_assumptions_reports_every_id() {
    let dir = tempfile::tempdir().unwrap();
    let o = nsdde(
        &["check-assumptions", "--model", "example-b", "--l1", "2"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(dir.path().join("assumptions.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 11);
    let status = |id: &str| rows.iter().find(|r| &r[0] == id).unwrap()[1].to_string();
    assert_eq!(status("A1"), "pass");
    assert_eq!(status("A3"), "pass");
    assert_eq!(status("B1"), "inapplicable");
}
