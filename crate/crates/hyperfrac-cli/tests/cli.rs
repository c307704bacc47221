use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hyperfrac"));
    cmd.env_remove("HYPERFRAC_THREADS");
    cmd
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn run(kind: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(kind)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

fn check<'a>(s: &'a Value, name: &str) -> &'a Value {
    s["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("no check {name}"))
}

#[test]
fn transform_check_succeeds_and_reports_plancherel() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "t.json",
        &json!({ "schema": "hyperfrac-config/1", "kind": "transform-check", "bump_radii": [2.0, 3.0] }),
    );
    let out = tmp.path().join("out");
    let o = run("transform-check", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["schema"], "hyperfrac-summary/1");
    assert_eq!(s["status"], "pass");
    let c = check(&s, "plancherel_relerr");
    assert!(c["value"].as_f64().unwrap() < 1e-6);
    assert!(out.join("plancherel.csv").exists());
    assert!(out.join("transform.csv").exists());
}

#[test]
fn missed_tolerance_exits_three_with_summary() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "t.json",
        &json!({
            "schema": "hyperfrac-config/1",
            "kind": "operator-equivalence",
            "s": [0.5],
            "tolerances": { "semigroup": 1e-300 },
        }),
    );
    let out = tmp.path().join("out");
    let o = run("operator-equivalence", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(3));
    let s = summary(&out);
    assert_eq!(s["status"], "fail");
    assert_eq!(check(&s, "semigroup_relerr")["pass"], false);
    assert!(out.join("routes.csv").exists());
}

#[test]
fn fem_backend_rejects_high_order() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "oe.json",
        &json!({ "schema": "hyperfrac-config/1", "kind": "operator-equivalence", "backend": "fem", "s": [1.5] }),
    );
    let out = tmp.path().join("out");
    let o = run("operator-equivalence", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.join("summary.json").exists());
}

#[test]
fn resonant_exponents_report_null_vector() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "e.json",
        &json!({ "schema": "hyperfrac-config/1", "kind": "entangle", "alphas": [0.5, 0.5] }),
    );
    let out = tmp.path().join("out");
    let o = run("entangle", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["payload"]["resonant"], true);
    assert_eq!(s["payload"]["null_vector"], true);
}

#[test]
fn validate_reports_missing_field_and_unknown_kind() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.json",
        &json!({ "schema": "hyperfrac-config/1", "kind": "solve", "bogus": 1 }),
    );
    let o = bin().args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["missing"], json!(["spec"]));
    assert_eq!(r["extra"], json!(["bogus"]));

    let cfg = write_config(tmp.path(), "u.json", &json!({ "schema": "hyperfrac-config/1", "kind": "nope" }));
    let o = bin().args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let kinds = r["allowed_kinds"].as_array().unwrap();
    assert_eq!(kinds.len(), 9);
    assert!(kinds.contains(&json!("recover")));
}

#[test]
fn validate_accepts_shipped_configs() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let o = bin().args(["validate", "--config"]).arg(&path).output().unwrap();
            assert_eq!(o.status.code(), Some(0), "{}: {}", path.display(), String::from_utf8_lossy(&o.stdout));
            n += 1;
        }
    }
    assert!(n >= 9);
}

#[test]
fn reruns_are_bit_identical_and_seed_override_is_recorded() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "e.json",
        &json!({ "schema": "hyperfrac-config/1", "kind": "entangle", "alphas": [0.3, 0.7], "seed": 5 }),
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(run("entangle", &cfg, &a, &["--threads", "1"]).status.code(), Some(0));
    assert_eq!(run("entangle", &cfg, &b, &[]).status.code(), Some(0));
    for f in ["summary.json", "singular_values.csv", "minimizer.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(summary(&a)["seed"], 5);

    let c = tmp.path().join("c");
    assert_eq!(run("entangle", &cfg, &c, &["--seed", "11"]).status.code(), Some(0));
    assert_eq!(summary(&c)["seed"], 11);
}

#[test]
fn zero_threads_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "t.json",
        &json!({ "schema": "hyperfrac-config/1", "kind": "transform-check" }),
    );
    let o = run("transform-check", &cfg, &tmp.path().join("out"), &["--threads", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn kind_mismatch_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "t.json",
        &json!({ "schema": "hyperfrac-config/1", "kind": "transform-check" }),
    );
    let o = run("entangle", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
}
