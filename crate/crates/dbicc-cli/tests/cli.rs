use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn dbicc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dbicc")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const HAND: &str = "individual,replicate,x\na,1,0\na,2,2\nb,1,0\nb,2,2\n";

#[test]
fn estimate_on_hand_data() {
    let dir = TempDir::new().unwrap();
    let input = write(dir.path(), "v.csv", HAND);
    let v = json(&dbicc(&["estimate", "--input", s(&input)]));
    assert_eq!(v["rho_hat"], -1.0);
    assert_eq!(v["msd_within"], 4.0);
    assert_eq!(v["msd_between"], 2.0);
    assert_eq!(v["n_within_pairs"], 2);
    assert_eq!(v["n_between_pairs"], 4);
    assert_eq!(v["distance"], "l2");
}

#[test]
fn distance_input_matches_vector_input() {
    let dir = TempDir::new().unwrap();
    let vectors = write(
        dir.path(),
        "v.csv",
        "individual,replicate,x,y\n1,1,0.5,1\n1,2,0.7,1.2\n2,1,-1,0\n2,2,-0.6,0.1\n3,1,2,2\n3,2,1.5,2.5\n",
    );
    let pts: [[f64; 2]; 6] = [[0.5, 1.0], [0.7, 1.2], [-1.0, 0.0], [-0.6, 0.1], [2.0, 2.0], [1.5, 2.5]];
    let rows: Vec<String> = pts
        .iter()
        .map(|a| {
            pts.iter()
                .map(|b| format!("{:?}", (a[0] - b[0]).hypot(a[1] - b[1])))
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    let distances = write(dir.path(), "d.csv", &(rows.join("\n") + "\n"));
    // rows listed out of order on purpose
    let groups = write(
        dir.path(),
        "g.csv",
        "row,individual,replicate\n3,2,2\n0,1,1\n1,1,2\n2,2,1\n5,3,2\n4,3,1\n",
    );
    let a = json(&dbicc(&["estimate", "--input", s(&vectors)]));
    let b = json(&dbicc(&["estimate", "--input", s(&distances), "--groups", s(&groups)]));
    let (x, y) = (a["rho_hat"].as_f64().unwrap(), b["rho_hat"].as_f64().unwrap());
    assert!((x - y).abs() < 1e-12, "{x} vs {y}");
    assert_eq!(a["n_between_pairs"], b["n_between_pairs"]);
}

fn series_csv(m: usize, p: usize, seed: u64) -> String {
    // small deterministic generator so the test does not depend on the library's RNG
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    let mut out = String::new();
    for _ in 0..m {
        let common = next();
        let row: Vec<String> = (0..p).map(|k| format!("{}", next() + common * (k % 3) as f64)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn timeseries_dataset(dir: &Path, individuals: usize, m: usize, p: usize) -> PathBuf {
    fs::create_dir_all(dir.join("ts")).unwrap();
    let mut manifest = String::from("individual,replicate,path\n");
    for i in 0..individuals {
        for j in 1..=2 {
            let name = format!("ts/s{i}_{j}.csv");
            write(dir, &name, &series_csv(m, p, (i * 10 + j) as u64));
            manifest.push_str(&format!("s{i},{j},{name}\n"));
        }
    }
    write(dir, "manifest.csv", &manifest)
}

#[test]
fn bootstrap_is_reproducible_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let manifest = timeseries_dataset(dir.path(), 6, 30, 5);
    let run = |threads: &str| {
        let out = dbicc(&[
            "--threads", threads, "bootstrap", "--input", s(&manifest), "--distance", "corr", "--boot", "300",
            "--seed", "7",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    let a = run("1");
    assert_eq!(a, run("1"));
    assert_eq!(a, run("3"));
    let v: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["B"], 300);
    assert_eq!(v["corrected"], true);
    assert_eq!(v["seed"], 7);
    assert!(v["ci_low"].as_f64().unwrap() <= v["ci_high"].as_f64().unwrap());
}

#[test]
fn small_boot_warns_and_logs_replicates() {
    let dir = TempDir::new().unwrap();
    let manifest = timeseries_dataset(dir.path(), 5, 20, 4);
    let log = dir.path().join("reps.csv");
    let out = dbicc(&[
        "bootstrap", "--input", s(&manifest), "--boot", "20", "--naive", "--replicate-log", s(&log),
    ]);
    let v = json(&out);
    assert_eq!(v["corrected"], false);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let text = fs::read_to_string(&log).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("replicate,all_distinct,naive,corrected"));
    assert_eq!(lines.count(), 20);
}

#[test]
fn sweep_at_zero_equals_estimate() {
    let dir = TempDir::new().unwrap();
    let manifest = timeseries_dataset(dir.path(), 6, 40, 6);
    let out = dbicc(&["sweep-threshold", "--input", s(&manifest), "--threshold-grid", "0:0.3:0.1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("distance,lambda,avg_fraction_zeroed,rho_hat"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 12);
    for name in ["l2", "l1", "corr"] {
        let sel: Vec<&Vec<String>> = rows.iter().filter(|r| r[0] == name).collect();
        assert_eq!(sel.len(), 4);
        let fractions: Vec<f64> = sel.iter().map(|r| r[2].parse().unwrap()).collect();
        assert_eq!(fractions[0], 0.0);
        assert!(fractions.windows(2).all(|w| w[0] <= w[1]));
        let est = json(&dbicc(&["estimate", "--input", s(&manifest), "--distance", name]));
        assert_eq!(sel[0][3].parse::<f64>().unwrap(), est["rho_hat"].as_f64().unwrap());
    }
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let good = write(dir.path(), "v.csv", HAND);

    let missing = dbicc(&["estimate", "--input", s(&dir.path().join("nope.csv"))]);
    assert_eq!(missing.status.code(), Some(2));

    let bad = write(dir.path(), "bad.csv", "individual,replicate,x\na,1,0\na,2,oops\n");
    let out = dbicc(&["estimate", "--input", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.csv:3:3"));

    let one = write(dir.path(), "one.csv", "individual,replicate,x\na,1,0\na,2,2\n");
    let out = dbicc(&["estimate", "--input", s(&one)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("InsufficientGroupsError"));

    let no_reps = write(dir.path(), "norep.csv", "individual,replicate,x\na,1,0\nb,1,2\n");
    assert_eq!(dbicc(&["estimate", "--input", s(&no_reps)]).status.code(), Some(3));

    assert_eq!(dbicc(&["estimate", "--input", s(&good), "--distance", "corr"]).status.code(), Some(3));
    assert_eq!(dbicc(&["bootstrap", "--input", s(&good), "--level", "1.5"]).status.code(), Some(4));
    assert_eq!(dbicc(&["estimate", "--input", s(&good), "--threshold", "2"]).status.code(), Some(4));
    assert_eq!(dbicc(&["estimate", "--input", s(&good), "--distance", "cosine"]).status.code(), Some(4));
    assert_eq!(dbicc(&["--threads", "0", "estimate", "--input", s(&good)]).status.code(), Some(4));
    assert_eq!(dbicc(&["--help"]).status.code(), Some(0));
}

#[test]
fn simulate_experiments() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("point.csv");
    let v = json(&dbicc(&[
        "simulate", "--experiment", "point", "--rho", "0.5", "--individuals", "20", "--reps", "30", "--seed", "4",
        "--csv", s(&csv),
    ]));
    assert_eq!(v["estimates"].as_array().unwrap().len(), 30);
    assert_eq!(v["replicate_seeds"].as_array().unwrap().len(), 30);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 31);

    let v = json(&dbicc(&[
        "simulate", "--experiment", "coverage", "--individuals", "15", "--reps", "10", "--boot", "200",
    ]));
    let cov = v["corrected_coverage"].as_f64().unwrap();
    assert!((0.0..=100.0).contains(&cov));

    let v = json(&dbicc(&[
        "simulate", "--experiment", "sb", "--p", "8", "--df", "20", "--individuals", "10", "--curves", "2",
        "--m-grid", "20,40,80", "--matrix", "corr",
    ]));
    assert_eq!(v["curves"].as_array().unwrap().len(), 2);
    assert_eq!(v["m_grid"], serde_json::json!([20, 40, 80]));
    assert!(v["mean_slope"].as_f64().unwrap().is_finite());

    let out = dbicc(&["simulate", "--experiment", "sb", "--phi", "1.0"]);
    assert_eq!(out.status.code(), Some(4));
}
