use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn evograph(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evograph"))
        .args(args)
        .arg("-o")
        .arg(out)
        .env_remove("EVOGRAPH_SEED")
        .env_remove("EVOGRAPH_OUT")
        .output()
        .expect("spawn evograph")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn tiny_simulation_is_exact_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate", "--alpha", "1", "--alpha1", "1", "-m", "1", "-T", "3", "--trials", "1000",
        "--seed", "7",
    ];
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = evograph(&args, d);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let text = fs::read_to_string(a.join("histogram_t3.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "# schema: evograph.histogram/1");
    assert!(rows[3].starts_with("1,2,0,"), "{}", rows[3]);
    assert!(rows[4].starts_with("2,1,0,"), "{}", rows[4]);
    for f in ["histogram_t3.csv", "trajectory.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let manifest = json(&a.join("manifest.json"));
    assert_eq!(manifest["config"]["seed"], 7);
    assert_eq!(manifest["streams"][0]["streams"], 1000);
    assert_eq!(manifest["artifacts"].as_array().unwrap().len(), 2);
}

#[test]
fn bad_alpha_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = evograph(&["theory", "--alpha", "0.5", "--alpha1", "0.3", "-m", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("1/2 < alpha <= 1"), "{}", stderr(&o));
}

#[test]
fn conjectured_region_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = evograph(&["theory", "--alpha", "0.55", "--alpha1", "0.55", "-m", "2"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn theory_constants() {
    let dir = tempfile::tempdir().unwrap();
    let o = evograph(&["theory", "--alpha", "1", "--alpha1", "1", "-m", "1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let c = json(&dir.path().join("constants.json"));
    assert_eq!(c["regime"], "PowerLaw");
    assert_eq!(c["exponent"].as_f64().unwrap(), 3.0);
    assert!((c["C"].as_f64().unwrap() - 4.0).abs() < 1e-6);

    let crit = dir.path().join("crit");
    let o = evograph(&["theory", "--alpha", "3/5", "--alpha1", "2/5", "-m", "2"], &crit);
    assert!(o.status.success(), "{}", stderr(&o));
    let c = json(&crit.join("constants.json"));
    assert_eq!(c["regime"], "Critical");
    assert!((c["mu"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn config_file_and_env_layering() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"alpha": "1", "alpha1": 1, "m": 1, "horizon": 50, "trials": 2, "seed": 3}"#)
        .unwrap();
    let out = dir.path().join("env-out");
    let o = Command::new(env!("CARGO_BIN_EXE_evograph"))
        .args(["simulate", "--config"])
        .arg(&cfg)
        .env("EVOGRAPH_SEED", "11")
        .env("EVOGRAPH_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["config"]["seed"], 11);
    assert_eq!(manifest["config"]["horizon"], 50);
}

#[test]
fn self_comparison_has_zero_distance() {
    let dir = tempfile::tempdir().unwrap();
    let o = evograph(
        &["compare", "--self-test", "--alpha", "0.75", "--alpha1", "0.3", "-m", "2"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&dir.path().join("comparison.json"));
    assert_eq!(r["total_variation"].as_f64().unwrap(), 0.0);
    assert_eq!(r["pass"], true);
}

#[test]
fn sweep_crosses_criticality() {
    let dir = tempfile::tempdir().unwrap();
    let o = evograph(
        &[
            "sweep", "--alpha", "0.6", "-m", "2", "--grid", "0.3,2/5,0.5", "-T", "20000",
            "--trials", "4",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let declared: Vec<&str> = text
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(2).unwrap())
        .collect();
    assert_eq!(declared, ["PowerLaw", "Critical", "Exponential"]);
}
