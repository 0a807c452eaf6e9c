use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use surfloss::predict::forward_loss;
use surfloss::ReferenceSet;

fn data(set: &str, file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(set).join(file)
}

fn surfloss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surfloss"))
        .args(args)
        .output()
        .expect("spawn surfloss")
}

fn extract_args<'a>(out: &'a str, m: &'a Path, q: &'a Path) -> Vec<&'a str> {
    vec!["extract", "--matrix", m.to_str().unwrap(), "--measurements", q.to_str().unwrap(), "--out", out]
}

/// Pulls "mean ± std" out of a table row such as "MA 3.3 ± 0.3 (×10⁻³)".
fn mean_std(row: &str) -> (f64, f64) {
    let parts: Vec<&str> = row.split_whitespace().collect();
    (parts[1].parse().unwrap(), parts[3].parse().unwrap())
}

#[test]
fn demo_tin_metal_air_row() {
    let dir = tempfile::tempdir().unwrap();
    let (m, q) = (data("tin", "matrix.csv"), data("tin", "measurements.csv"));
    let out = surfloss(&extract_args(dir.path().to_str().unwrap(), &m, &q));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let row = stdout.lines().find(|l| l.starts_with("MA ")).unwrap();
    assert!(row.ends_with("(×10⁻³)"), "{row}");
    let (mean, std) = mean_std(row);
    // published 3.3 ± 0.4 (×10⁻³)
    assert!((mean - 3.3).abs() <= 0.4, "{row}");
    assert!((0.2..=0.8).contains(&std), "{row}");
    assert!(dir.path().join("results.json").is_file());
}

#[test]
fn same_seed_is_byte_identical() {
    let (m, q) = (data("tin-hf", "matrix.csv"), data("tin-hf", "measurements.csv"));
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let out = surfloss(&extract_args(dir.path().to_str().unwrap(), &m, &q));
        assert!(out.status.success());
        (out.stdout, std::fs::read(dir.path().join("results.json")).unwrap())
    };
    assert_eq!(run(), run());
}

#[test]
fn missing_file_exits_3_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let q = data("tin", "measurements.csv");
    let out_dir = dir.path().join("out");
    let out = surfloss(&extract_args(out_dir.to_str().unwrap(), &missing, &q));
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));
    assert!(!out_dir.exists() || std::fs::read_dir(&out_dir).unwrap().next().is_none());
}

#[test]
fn malformed_csv_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("matrix.csv");
    std::fs::write(&bad, "design,material,process,MS,SA,MA,Si\nMS design,TiN,none,abc,0.1,0.1,80\n").unwrap();
    let q = data("tin", "measurements.csv");
    let out = surfloss(&extract_args(dir.path().to_str().unwrap(), &bad, &q));
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("results.json").exists());
}

#[test]
fn participation_above_one_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("matrix.csv");
    let text = std::fs::read_to_string(data("tin", "matrix.csv")).unwrap();
    std::fs::write(&bad, text.replace("86.149", "186.149")).unwrap();
    let q = data("tin", "measurements.csv");
    let out = surfloss(&extract_args(dir.path().to_str().unwrap(), &bad, &q));
    assert_eq!(out.status.code(), Some(5), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn zero_threads_is_a_usage_error() {
    let (m, q) = (data("tin", "matrix.csv"), data("tin", "measurements.csv"));
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["--threads", "0"];
    args.extend(extract_args(dir.path().to_str().unwrap(), &m, &q));
    assert_eq!(surfloss(&args).status.code(), Some(2));
}

#[test]
fn noiseless_synth_reproduces_analytic_q() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = surfloss(&["synth", "--reference", "tin", "--noise", "0", "--n", "3", "--out", d]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let set = ReferenceSet::TiN;
    let m = set.matrix();
    let text = std::fs::read_to_string(dir.path().join("measurements.csv")).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let i = m.designs().iter().position(|d| d.design.to_string() == f[0]).unwrap();
        let q_lp: f64 = f[4].parse().unwrap();
        assert_eq!(f[5], "inf");
        assert_eq!(q_lp, 1.0 / forward_loss(m.row(i), &set.ground_truth()));
        rows += 1;
    }
    assert_eq!(rows, 12);
}

#[test]
fn budget_over_two_sets_with_figure() {
    let dir = tempfile::tempdir().unwrap();
    let strs = |p: PathBuf| p.to_str().unwrap().to_string();
    let (m1, q1) = (strs(data("tin", "matrix.csv")), strs(data("tin", "measurements.csv")));
    let (m2, q2) = (strs(data("tin-hf", "matrix.csv")), strs(data("tin-hf", "measurements.csv")));
    let out = surfloss(&[
        "budget", "--set", &m1, &q1, "TiN", "--set", &m2, &q2, "TiN HF", "--samples", "2000", "--svg",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("TiN:") && stdout.contains("TiN HF:"), "{stdout}");
    let svg = std::fs::read_to_string(dir.path().join("budget.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("budget.json")).unwrap()).unwrap();
    assert!(json.to_string().contains("TiN HF"));
}

#[test]
fn hf_substrate_air_bound() {
    let dir = tempfile::tempdir().unwrap();
    let (m, q) = (data("tin-hf", "matrix.csv"), data("tin-hf", "measurements.csv"));
    let out = surfloss(&[
        "bound", "--matrix", m.to_str().unwrap(), "--measurements", q.to_str().unwrap(), "--region", "SA",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("SA <") && stdout.trim_end().ends_with("(×10⁻³)"), "{stdout}");
    assert!(dir.path().join("bound.json").is_file());
}
