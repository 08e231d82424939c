//! End-to-end runs of the `gmbridge` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn config(name: &str) -> PathBuf {
    repo_root().join("configs").join(name)
}

fn gmbridge(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmbridge"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).expect("file exists")).expect("valid json")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

const SMALL: &str = "[run]\nseed = 7\npaths = 200\n[bridge]\ndelta = 1.0\nbeta = 5.0\ny_target = 1\n";

#[test]
fn verify_law_passes_on_the_default_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = gmbridge(&["verify", "law"], &config("default.toml"), dir.path());
    assert!(
        o.status.success(),
        "{}\n{}",
        String::from_utf8_lossy(&o.stdout),
        stderr(&o)
    );
    let reports = read_json(&dir.path().join("reports.json"));
    let reports = reports.as_array().unwrap();
    assert!(reports.len() >= 8);
    assert!(reports.iter().all(|r| r["pass"] == true && r["anchor"].is_string()));
    assert_eq!(read_json(&dir.path().join("manifest.json"))["pass"], true);
}

#[test]
fn missing_required_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[run]\nseed = 1\npaths = 10\n[bridge]\nbeta = 5.0\ny_target = 1\n",
    );
    let o = gmbridge(&["bridge", "simulate"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(
        err.contains("config-invalid") && err.contains("`bridge.delta`"),
        "{err}"
    );
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}[verify]\nsignificanse = 0.05\n"));
    let o = gmbridge(&["verify", "law"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`verify.significanse`"), "{}", stderr(&o));
}

fn output_hashes(dir: &Path) -> Vec<(String, String)> {
    read_json(&dir.join("manifest.json"))["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| (f["file"].as_str().unwrap().into(), f["sha256"].as_str().unwrap().into()))
        .collect()
}

#[test]
fn same_seed_gives_identical_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for out in [&a, &b] {
        assert!(gmbridge(&["bridge", "simulate"], &cfg, out).status.success());
    }
    let first = output_hashes(&a);
    assert!(first.iter().any(|(f, _)| f == "paths.jsonl"));
    assert_eq!(first, output_hashes(&b));
    assert_eq!(
        read_json(&a.join("manifest.json"))["config_sha256"],
        read_json(&b.join("manifest.json"))["config_sha256"]
    );
    let bytes = |d: &Path| std::fs::read(d.join("paths.jsonl")).unwrap();
    assert_eq!(bytes(&a), bytes(&b));

    assert!(gmbridge(&["bridge", "simulate", "--seed", "8"], &cfg, &c)
        .status
        .success());
    let paths_hash = |h: &[(String, String)]| h.iter().find(|(f, _)| f == "paths.jsonl").unwrap().1.clone();
    assert_ne!(paths_hash(&first), paths_hash(&output_hashes(&c)));
}

#[test]
fn fast_tier_caps_the_sample() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("paths = 200", "paths = 5000"));
    let out = dir.path().join("out");
    let o = gmbridge(&["bridge", "simulate", "--fast"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_json(&out.join("summary.json"))["paths"], 2000);
    assert_eq!(read_json(&out.join("manifest.json"))["tier"], "fast");
}

#[test]
fn paths_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    assert!(gmbridge(&["bridge", "simulate", "--paths", "17"], &cfg, &out)
        .status
        .success());
    let text = std::fs::read_to_string(out.join("paths.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 17);
}

#[test]
fn library_errors_carry_the_module() {
    let dir = tempfile::tempdir().unwrap();
    // the independence check needs at least 100 paths
    let cfg = write_config(dir.path(), &SMALL.replace("paths = 200", "paths = 50"));
    let o = gmbridge(&["verify", "law"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(4));
    assert!(
        stderr(&o).contains("error[verify_harness/insufficient-sample]"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn failed_checks_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // a sweep over a single order size has no convergence order to fit
    let cfg = write_config(dir.path(), &format!("{SMALL}[limit]\ndelta_list = [0.1]\n"));
    let out = dir.path().join("out");
    let o = gmbridge(&["limit", "depth"], &cfg, &out);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert_eq!(read_json(&out.join("manifest.json"))["pass"], false);
}

#[test]
fn value_surface_and_residuals_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let o = gmbridge(&["equilibrium", "value"], &config("equilibrium_value.toml"), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("surface.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("y,t,H,L,p,a,b"));
    assert_eq!(lines.count(), 41 * 5);
    let residuals = read_json(&dir.path().join("residuals.json"));
    assert!(residuals["equality_residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn limit_depth_writes_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let o = gmbridge(&["limit", "depth"], &config("limit_depth.toml"), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let dat = std::fs::read_to_string(dir.path().join("depth_convergence.dat")).unwrap();
    assert_eq!(dat.lines().count(), 4);
    for line in dat.lines() {
        let cols: Vec<f64> = line.split_whitespace().map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), 2);
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(repo_root().join("configs")).unwrap() {
        let path = entry.unwrap().path();
        // `--paths 0` fails validation after parsing, so nothing is simulated
        let o = gmbridge(&["bridge", "simulate", "--paths", "0"], &path, dir.path());
        let err = stderr(&o);
        assert!(err.contains("`run.paths`"), "{}: {err}", path.display());
    }
}

#[test]
fn committed_traceability_matrix_is_current() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_gmbridge"))
        .args(["docs", "traceability", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    let fresh = std::fs::read_to_string(dir.path().join("traceability.md")).unwrap();
    let committed = std::fs::read_to_string(repo_root().join("docs/traceability.md")).unwrap();
    assert_eq!(fresh, committed, "regenerate with `gmbridge docs traceability`");
}
