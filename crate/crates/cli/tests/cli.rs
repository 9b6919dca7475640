use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn stts(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stts"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = stts(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn word_table() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/word_table_100.json")
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_results_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&["run", "--replications", "4", "--output", s(dir.path())]);
    assert!(stdout.contains("avg_accuracy"));
    assert_eq!(
        header(&dir.path().join("results.csv")),
        "scenario,algorithm,J,M,p_or_kind,sigma_eeg,replication,task,tau,decided,truth,correct,budget,capped"
    );
    let rows = std::fs::read_to_string(dir.path().join("results.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(rows, 1 + 4 * 20);
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(summary.starts_with("scenario,algorithm,J,M,p_or_kind"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "algorithm = \"vtts\"\nnum_arms = 5\nnum_tasks = 3\nreplications = 2\np = 0.9\n",
    )
    .unwrap();
    ok(&[
        "run",
        "-c",
        s(&cfg),
        "--num-tasks",
        "4",
        "--p",
        "uniform",
        "--output",
        s(dir.path()),
    ]);
    let results = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let first = results.lines().nth(1).unwrap();
    assert!(first.starts_with("synthetic_markov,vtts,5,4,0.2,"), "{first}");
    assert_eq!(results.lines().count(), 1 + 2 * 4);
}

#[test]
fn rerun_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        ok(&[
            "run",
            "--algorithm",
            "br",
            "--replications",
            "5",
            "--master-seed",
            "9",
            "--output",
            s(d.path()),
        ]);
    }
    let ra = std::fs::read(a.path().join("results.csv")).unwrap();
    let rb = std::fs::read(b.path().join("results.csv")).unwrap();
    assert_eq!(ra, rb);
}

#[test]
fn sweep_crosses_algorithms_and_values() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "sweep",
        "--axis",
        "p",
        "--values",
        "uniform,0.5,1.0",
        "--algorithms",
        "stts,random",
        "--replications",
        "3",
        "--output",
        s(dir.path()),
    ]);
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows[0].starts_with("synthetic_markov,stts,10,20,0.1,"));
    assert!(rows[5].starts_with("synthetic_markov,random,10,20,1,"));
}

#[test]
fn budget_mode_from_flags() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "run",
        "--mode",
        "fixed_budget",
        "--t-max",
        "5",
        "--algorithm",
        "random",
        "--replications",
        "2",
        "--output",
        s(dir.path()),
    ]);
    let results = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert!(results.lines().skip(1).all(|l| l.split(',').nth(8) == Some("5")));
}

#[test]
fn bound_prints_terms() {
    let out = ok(&["bound", "--n", "1000", "--entropy", "0"]);
    assert!(
        out.contains("main=0.000000e0 remainder=0.000000e0 total=0.000000e0"),
        "{out}"
    );
    let out = ok(&["bound", "--n", "1000000", "--p", "1.0"]);
    assert!(out.contains("entropy=0.000000"), "{out}");
    let out = ok(&["bound", "--p", "0.5"]);
    assert!(out.contains("main="));
}

#[test]
fn allocation_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&[
        "allocation",
        "--checkpoints",
        "50,100",
        "--p-values",
        "0.1,0.9",
        "--replications",
        "2",
        "--num-tasks",
        "2",
        "--output",
        s(dir.path()),
    ]);
    assert!(out.contains("p=0.9"));
    let path = dir.path().join("allocation.csv");
    assert_eq!(header(&path), "t,kl,p,replication");
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1 + 2 * 2 * 2);
}

#[test]
fn gen_calibration_exports_readable_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&[
        "gen-calibration",
        "--calib-targets",
        "40",
        "--calib-nontargets",
        "120",
        "--output",
        s(dir.path()),
    ]);
    assert!(out.contains("standardized gap"));
    let data = stts_core::p300::read_calibration(dir.path().join("calibration.csv")).unwrap();
    assert_eq!(data.len(), 160);
    let model = stts_core::p300::read_model(dir.path().join("model.csv")).unwrap();
    assert!(!model.selected.is_empty());
}

#[test]
fn validate_table_accepts_bundled_and_rejects_broken() {
    let out = ok(&["validate-table", s(&word_table())]);
    assert!(out.starts_with("ok: 100 words"), "{out}");
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"vocab": ["a", "b"], "initial": [0.5, 0.5], "transitions": {"a": {"a": 0.5, "b": 0.5}}}"#,
    )
    .unwrap();
    let out = stts(&["validate-table", s(&bad)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing transition row"));
    assert!(!stts(&["validate-table", s(&word_table()), "--cap", "50"])
        .status
        .success());
}

#[test]
fn p300_run_with_gaussian_channel() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "run",
        "--scenario",
        "p300",
        "--word-table",
        s(&word_table()),
        "--p300-reward",
        "gaussian",
        "--replications",
        "2",
        "--num-tasks",
        "3",
        "--output",
        s(dir.path()),
    ]);
    let results = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert!(results.lines().nth(1).unwrap().starts_with("p300,stts,100,3,"));
}

#[test]
fn bad_input_fails_cleanly() {
    let out = stts(&["run", "--num-armz", "3"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("num_armz"));
    assert!(!stts(&["run", "--delta", "2"]).status.success());
    assert!(!stts(&["run", "-c", "/nonexistent/cfg.toml"]).status.success());
}
