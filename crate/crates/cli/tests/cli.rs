//! End-to-end behavior of the `biphoton` binary: flag handling, exit
//! codes, file outputs, and the machine-parseable error channel.

use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_biphoton"))
}

fn run_args(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr_error_kind(out: &Output) -> String {
    let value: serde_json::Value = serde_json::from_slice(&out.stderr)
        .unwrap_or_else(|e| panic!("stderr is not JSON: {e}: {}", String::from_utf8_lossy(&out.stderr)));
    value["error"]["kind"].as_str().unwrap().to_string()
}

const ED_PLUS: &str = r#"{"kind":"exp_decay","gamma":1.0,"detuning":8.0}"#;
const ED_MINUS: &str = r#"{"kind":"exp_decay","gamma":1.0,"detuning":-8.0}"#;

#[test]
fn probs_hom_values() {
    let out = run_args(&[
        "probs", "--shape1", ED_PLUS, "--shape2", ED_PLUS, "--t-sq", "0.5",
    ]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let data = &value["data"];
    assert!((data["J_abs"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(data["P11"].as_f64().unwrap().abs() < 1e-12);
    assert!((data["P20"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert!((data["P02"].as_f64().unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn probs_detuned_pair() {
    let out = run_args(&[
        "probs", "--shape1", ED_PLUS, "--shape2", ED_MINUS, "--t-sq", "0.5",
        "--grid-min", "0", "--grid-max", "20", "--grid-points", "4001",
    ]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((value["data"]["P11"].as_f64().unwrap() - 0.4923).abs() < 1e-4);
}

#[test]
fn out_of_range_t_sq_is_usage_error() {
    let out = run_args(&[
        "probs", "--shape1", ED_PLUS, "--shape2", ED_MINUS, "--t-sq", "1.5",
    ]);
    assert_eq!(out.status.code(), Some(64));
    assert_eq!(stderr_error_kind(&out), "usage");
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = run_args(&["probs", "--nonsense"]);
    assert_eq!(out.status.code(), Some(64));
    assert_eq!(stderr_error_kind(&out), "usage");
}

#[test]
fn help_exits_zero() {
    let out = run_args(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("biphoton"));
}

#[test]
fn coverage_failure_is_data_error() {
    let out = run_args(&[
        "probs", "--shape1", ED_PLUS, "--shape2", ED_MINUS, "--t-sq", "0.5",
        "--grid-min", "0", "--grid-max", "2", "--grid-points", "101",
    ]);
    assert_eq!(out.status.code(), Some(65));
    assert_eq!(stderr_error_kind(&out), "data");
}

#[test]
fn shape_file_reference_is_expanded() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("shape.json");
    std::fs::write(&path, ED_PLUS).unwrap();
    let spec = format!("@{}", path.display());
    let out = run_args(&["probs", "--shape1", &spec, "--shape2", ED_PLUS, "--t-sq", "0.5"]);
    assert!(out.status.success());
    // the echoed config carries the resolved shape, not the file reference
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(value["config"]["shape1"]["kind"], "exp_decay");
}

#[test]
fn surface_row_count_contract() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("surface.csv");
    let out = run_args(&[
        "entropy-surface", "--outcome", "11",
        "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config: "));
    assert_eq!(lines.next().unwrap(), "J_abs,t_sq,outcome,entropy");
    // default 101 x 101 grid
    assert_eq!(lines.count(), 10201);
    // the |J| = 1, t^2 = 0.5 cell is degenerate: empty entropy field
    assert_eq!(text.lines().filter(|l| l.ends_with(",11,")).count(), 1);
}

#[test]
fn surface_out20_rows_are_constant_in_t_sq() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("surface20.csv");
    let out = run_args(&[
        "entropy-surface", "--outcome", "20", "--j-min", "0.5", "--j-max", "0.5",
        "--j-points", "1", "--t-sq-points", "9", "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let entropies: Vec<f64> = text
        .lines()
        .skip(2)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(entropies.len(), 9);
    for e in &entropies {
        assert!((e - entropies[0]).abs() < 1e-15);
        assert!((e - 0.4690).abs() < 5e-4);
    }
}

#[test]
fn surface_without_out_path_is_usage_error() {
    let out = run_args(&["entropy-surface", "--outcome", "11"]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn joint_writes_metadata_and_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("joint.csv");
    let out = run_args(&[
        "joint", "--shape1", ED_PLUS, "--shape2", ED_MINUS, "--t-sq", "0.5",
        "--outcome", "20", "--grid-min", "0", "--grid-max", "20",
        "--grid-points", "101", "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&path).unwrap();
    assert_eq!(csv.lines().count(), 101 * 101 + 1);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path.with_extension("json")).unwrap())
            .unwrap();
    assert_eq!(meta["data"]["outcome"], "20");

    // |2,0> matrix is symmetric: spot-check a few transposed pairs
    let cells: Vec<(usize, usize, f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',');
            (
                it.next().unwrap().parse().unwrap(),
                it.next().unwrap().parse().unwrap(),
                it.next().unwrap().parse().unwrap(),
                it.next().unwrap().parse().unwrap(),
            )
        })
        .collect();
    let at = |i: usize, j: usize| cells[i * 101 + j];
    for (i, j) in [(3, 50), (20, 77), (64, 12)] {
        let a = at(i, j);
        let b = at(j, i);
        assert!((a.2 - b.2).abs() < 1e-12 && (a.3 - b.3).abs() < 1e-12);
    }
}

#[test]
fn joint_beat_pattern_zeros() {
    // |F11| vanishes on the lines t2 - t1 = k pi / 4 for relative
    // detuning 8 (grid points at multiples of 0.1 hit pi/4 only at 0)
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("beat.csv");
    let out = run_args(&[
        "joint", "--shape1", ED_PLUS, "--shape2", ED_MINUS, "--t-sq", "0.5",
        "--outcome", "11", "--grid-min", "0", "--grid-max", "20",
        "--grid-points", "201", "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&path).unwrap();
    let mut diag_max: f64 = 0.0;
    let mut overall_max: f64 = 0.0;
    for line in csv.lines().skip(1) {
        let mut it = line.split(',');
        let i: usize = it.next().unwrap().parse().unwrap();
        let j: usize = it.next().unwrap().parse().unwrap();
        let re: f64 = it.next().unwrap().parse().unwrap();
        let im: f64 = it.next().unwrap().parse().unwrap();
        let mag = (re * re + im * im).sqrt();
        overall_max = overall_max.max(mag);
        if i == j {
            diag_max = diag_max.max(mag);
        }
    }
    assert!(diag_max < 1e-12, "diagonal magnitude {diag_max}");
    assert!(overall_max > 0.1, "matrix appears empty");
}

#[test]
fn joint_without_out_path_is_usage_error() {
    let out = run_args(&[
        "joint", "--shape1", ED_PLUS, "--shape2", ED_MINUS, "--t-sq", "0.5",
        "--outcome", "11",
    ]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn herald_csv_and_sweep() {
    let out = run_args(&[
        "herald", "--shape1", ED_PLUS, "--shape2", ED_MINUS, "--t-sq", "0.5",
        "--outcome", "11", "--t-dec", "0.5", "--format", "csv",
        "--t-r-sweep", "0.05:0.4:5",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config: "));
    assert_eq!(lines.next().unwrap(), "t_R,success_probability,fidelity");
    let successes: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(successes.len(), 5);
    assert!(successes.windows(2).all(|w| w[1] >= w[0]), "{successes:?}");
}

#[test]
fn herald_rejects_port2_outcome() {
    let out = run_args(&[
        "herald", "--shape1", ED_PLUS, "--shape2", ED_MINUS, "--t-sq", "0.5",
        "--outcome", "02", "--t-dec", "0.5",
    ]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn herald_impossible_detection_is_data_error() {
    let out = run_args(&[
        "herald", "--shape1", ED_PLUS, "--shape2", ED_MINUS, "--t-sq", "0.5",
        "--outcome", "11", "--t-dec", "-5",
    ]);
    assert_eq!(out.status.code(), Some(65));
    assert_eq!(stderr_error_kind(&out), "data");
}

#[test]
fn optimize_smoke_and_determinism() {
    let problem = r#"{"target":{"kind":"gaussian","gamma":1.0},"budget":400,"restarts":2,"seed":3,"grid":{"t_min":-10.0,"t_max":30.0,"n_points":501}}"#;
    let a = run_args(&["optimize", "--problem", problem]);
    assert!(a.status.success(), "stderr: {}", String::from_utf8_lossy(&a.stderr));
    let b = run_args(&["optimize", "--problem", problem]);
    assert_eq!(a.stdout, b.stdout, "same seed must give identical bytes");
    let value: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert!(value["data"]["fidelity"].as_f64().unwrap() > 0.0);
    assert!(value["data"]["x_best"]["gamma1"].is_f64());
    assert_eq!(value["config"]["budget"], 400);

    // flag overrides the problem file
    let c = run_args(&["optimize", "--problem", problem, "--seed", "4"]);
    assert!(c.status.success());
    let cv: serde_json::Value = serde_json::from_slice(&c.stdout).unwrap();
    assert_eq!(cv["config"]["seed"], 4);
}

#[test]
fn optimize_rejects_bad_problem_files() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "").unwrap();
    let spec = format!("@{}", empty.display());
    let out = run_args(&["optimize", "--problem", &spec]);
    assert_eq!(out.status.code(), Some(64));
    assert_eq!(stderr_error_kind(&out), "usage");

    // non-Gaussian target is rejected up front
    let out = run_args(&[
        "optimize", "--problem", r#"{"target":{"kind":"exp_decay","gamma":1.0,"detuning":0.0}}"#,
    ]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn thread_cap_env_is_accepted() {
    let out = bin()
        .env("BIPHOTON_THREADS", "1")
        .args(["probs", "--shape1", ED_PLUS, "--shape2", ED_MINUS, "--t-sq", "0.5"])
        .output()
        .unwrap();
    assert!(out.status.success());
}
