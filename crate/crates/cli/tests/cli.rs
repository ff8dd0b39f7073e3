use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_corrmatch"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

const TWO_GROUP: &str = r#"
  "market": {
    "alpha": ["1/4", "1/4"],
    "gamma": ["1/2", "1/2"],
    "beta": "uniform",
    "groups": [
      {"marginals": {"kind": "gaussian", "mean": 0, "variance": 1}, "copula": {"family": "gaussian"}, "theta": 0},
      {"marginals": {"kind": "gaussian", "mean": "0.2", "variance": 1}, "copula": {"family": "gaussian"}, "theta": 0}
    ]
  }"#;

#[test]
fn solve_benchmark_writes_closed_form_cutoffs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&configs().join("benchmark_solve.json"), tmp.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        header(&tmp.path().join("cutoffs.csv")),
        "combo_id,theta_target_group,theta_value,college,cutoff,full_flag"
    );
    assert_eq!(
        header(&tmp.path().join("ranks.csv")),
        "combo_id,theta_value,group,pref_list,k,R"
    );
    assert_eq!(header(&tmp.path().join("globals.csv")), "combo_id,theta_value,E,L_12");
    let cut = rows(&tmp.path().join("cutoffs.csv"));
    assert_eq!(cut.len(), 2);
    for r in &cut {
        let p: f64 = r[4].parse().unwrap();
        assert!((p - 0.5f64.sqrt()).abs() < 1e-6);
        assert_eq!(r[5], "1");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "solve");
    assert_eq!(manifest["spec_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["tolerances"]["solver"], 1e-8);
}

#[test]
fn sweep_row_counts_match_grid_and_reruns_are_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("counterexample_sweep.json");
    assert!(run(&cfg, a.path(), &["--jobs", "1"]).status.success());
    assert!(run(&cfg, b.path(), &["--jobs", "3"]).status.success());
    for f in ["cutoffs.csv", "ranks.csv", "globals.csv", "manifest.json"] {
        let x = fs::read(a.path().join(f)).unwrap();
        let y = fs::read(b.path().join(f)).unwrap();
        if f == "manifest.json" {
            // only the recorded job count differs
            let mut vx: serde_json::Value = serde_json::from_slice(&x).unwrap();
            let mut vy: serde_json::Value = serde_json::from_slice(&y).unwrap();
            vx["jobs"] = 0.into();
            vy["jobs"] = 0.into();
            assert_eq!(vx, vy);
        } else {
            assert_eq!(x, y, "{f} differs between runs");
        }
    }
    // 100 nodes, 3 colleges, 2 groups x 6 lists x 3 ranks
    assert_eq!(rows(&a.path().join("cutoffs.csv")).len(), 300);
    assert_eq!(rows(&a.path().join("ranks.csv")).len(), 3600);
    assert_eq!(rows(&a.path().join("globals.csv")).len(), 100);
    let first = &rows(&a.path().join("cutoffs.csv"))[0];
    assert_eq!(first[..4], ["0", "2", "0", "1"]);
}

#[test]
fn grid_uses_row_index_as_combo_id() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!(
            r#"{{"command": "grid", {TWO_GROUP},
              "grid": {{"row_group": 1, "rows": ["0", "0.5", "0.9"], "col_group": 2, "cols": {{"start": 0, "stop": "0.8", "count": 5}}}}}}"#
        ),
    );
    let out_dir = tmp.path().join("out");
    let out = run(&cfg, &out_dir, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cut = rows(&out_dir.join("cutoffs.csv"));
    assert_eq!(cut.len(), 3 * 5 * 2);
    let combos = rows(&out_dir.join("combos.csv"));
    assert_eq!(combos.len(), 3);
    assert_eq!(combos[1], ["1", "1", "0.5"]);
    let ids: Vec<&str> = cut.iter().map(|r| r[0].as_str()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
    assert_eq!(rows(&out_dir.join("globals.csv")).len(), 15);
}

#[test]
fn contour_points_hold_target_efficiency() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&configs().join("gaussian_pair_contour.json"), tmp.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let pts = rows(&tmp.path().join("contour.csv"));
    assert!(!pts.is_empty());
    for p in &pts {
        let e: f64 = p[3].parse().unwrap();
        assert!((e - 0.36).abs() < 1e-6, "E = {e}");
    }
}

#[test]
fn tiebreak_and_latent_commands_run() {
    for (name, cutoffs) in [("tiebreak_sweep.json", 20), ("latent_solve.json", 2)] {
        let tmp = tempfile::tempdir().unwrap();
        let out = run(&configs().join(name), tmp.path(), &[]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(rows(&tmp.path().join("cutoffs.csv")).len(), cutoffs, "{name}");
    }
}

#[test]
fn oracle_is_seed_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!(r#"{{"command": "oracle", {TWO_GROUP}, "oracle": {{"students": 4000, "seed_count": 3}}}}"#),
    );
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    assert!(run(&cfg, &a, &["--seed", "11"]).status.success());
    assert!(run(&cfg, &b, &["--seed", "11"]).status.success());
    assert!(run(&cfg, &c, &["--seed", "12"]).status.success());
    let read = |d: &Path| fs::read(d.join("oracle_cutoffs.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    assert_eq!(
        header(&a.join("oracle_cutoffs.csv")),
        "seed,combo_id,theta_target_group,theta_value,college,cutoff,full_flag"
    );
    let summary = rows(&a.join("oracle_summary.csv"));
    assert_eq!(summary.len(), 3);
    assert_eq!(summary[0][0], "11");
    assert!(summary.iter().all(|r| r[3] == "0"));
}

#[test]
fn small_census_writes_every_combination() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"command": "census", "census": {"template": "four_college", "theta2_grid": ["0", "0.5", "0.9"]}}"#,
    );
    let out_dir = tmp.path().join("out");
    let out = run(&cfg, &out_dir, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(rows(&out_dir.join("combos.csv")).len(), 36);
    assert_eq!(rows(&out_dir.join("cutoffs.csv")).len(), 36 * 3 * 4);
    assert_eq!(rows(&out_dir.join("globals.csv")).len(), 36 * 3);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["summary"]["combinations"], 36);
    assert_eq!(manifest["summary"]["failures"], 0);
}

#[test]
fn validation_errors_exit_two_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = [
        r#"{"command": "solve", "mystery": 1}"#.to_string(),
        r#"{"command": "solve", "market": {"alpha": ["1/0", "1/4"], "gamma": [1], "beta": "uniform"}}"#.to_string(),
        format!(r#"{{"command": "sweep", {TWO_GROUP}}}"#),
        format!(r#"{{"command": "sweep", {TWO_GROUP}, "sweep": {{"group": 3, "thetas": ["0"]}}}}"#),
        format!(r#"{{"command": "tiebreak", {TWO_GROUP}}}"#),
        r#"{"command": "solve", "market": {"alpha": ["0.3", "1.2"], "gamma": [1], "beta": "uniform",
            "groups": [{"marginals": {"kind": "uniform", "lo": 0, "hi": 1}, "copula": {"family": "gaussian"}, "theta": 0}]}}"#
            .to_string(),
        "not json".to_string(),
    ];
    for (k, body) in bad.iter().enumerate() {
        let cfg = write_config(tmp.path(), body);
        let out_dir = tmp.path().join(format!("out{k}"));
        let out = run(&cfg, &out_dir, &[]);
        assert_eq!(
            out.status.code(),
            Some(2),
            "case {k}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out_dir.exists(), "case {k} created outputs");
    }
}

#[test]
fn solver_failure_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &configs().join("benchmark_solve.json"),
        tmp.path(),
        &["--tol", "1e-300"],
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn missing_flag_is_a_usage_error() {
    let out = bin().arg("--config").arg("x.json").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
