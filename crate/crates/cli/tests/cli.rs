use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fhn-rdm"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn pulse_writes_profile_and_manifest() {
    let d = TempDir::new().unwrap();
    let out = run(d.path(), &["pulse", "--eps", "0.02"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["pulse.csv", "pulse.json", "pulse.plt", "manifest.json"] {
        assert!(d.path().join(f).exists(), "missing {f}");
    }
    let csv = std::fs::read_to_string(d.path().join("pulse.csv")).unwrap();
    assert!(csv.starts_with("xi,u,v,w,du,dv,dw\n"));
    let m = json(&d.path().join("manifest.json"));
    assert_eq!(m["command"], "pulse");
    assert_eq!(m["status"], "ok");
    assert_eq!(m["config"]["params"]["eps"], 0.02);
    let arts: Vec<&str> = m["artifacts"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(arts, ["pulse.csv", "pulse.json", "pulse.plt"]);
    let p = json(&d.path().join("pulse.json"));
    assert!(p["header"]["c"].as_f64().unwrap() > 0.19);
}

#[test]
fn reruns_are_bit_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert_eq!(run(a.path(), &["pulse", "--eps", "0.02"]).status.code(), Some(0));
    assert_eq!(run(b.path(), &["pulse", "--eps", "0.02", "--jobs", "1"]).status.code(), Some(0));
    let read = |d: &TempDir| std::fs::read(d.path().join("pulse.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn bad_config_exits_with_three() {
    let d = TempDir::new().unwrap();
    for body in ["alpha = 1.0\n", "eps = -0.01\n", "a = 0.7\n"] {
        let cfg = config(d.path(), body);
        let out = run(d.path(), &["--config", &cfg, "pulse"]);
        assert_eq!(out.status.code(), Some(3), "{body}");
        let e = json(&d.path().join("error.json"));
        assert_eq!(e["status"], "config_rejected");
    }
    let out = run(d.path(), &["pulse", "--jobs", "0"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sweep_needs_three_values() {
    let d = TempDir::new().unwrap();
    let out = run(d.path(), &["sweep", "--eps", "0.02,0.01"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn numerical_failure_exits_with_two() {
    let d = TempDir::new().unwrap();
    // No pulse exists this far from the singular limit.
    let out = run(d.path(), &["pulse", "--a", "0.4", "--eps", "0.02"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(d.path().join("pulse_diagnostics.json").exists());
    assert_eq!(json(&d.path().join("error.json"))["status"], "numerical_failure");
    assert!(!d.path().join("manifest.json").exists());
}

#[test]
fn melnikov_without_back_layer_fails() {
    let d = TempDir::new().unwrap();
    let out = run(d.path(), &["melnikov", "--a", "0.1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn melnikov_report_has_all_integrals() {
    let d = TempDir::new().unwrap();
    let out = run(d.path(), &["melnikov", "--eps", "0.02"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = json(&d.path().join("melnikov.json"));
    assert!((m["m_f"].as_f64().unwrap() - std::f64::consts::FRAC_PI_4).abs() < 1e-10);
    assert!(m["m_b2_full"].as_f64().unwrap() > 0.0);
    assert!(m["lambda1_pred"].as_f64().unwrap() < 0.0);
}

#[test]
fn simulate_writes_distance_and_snapshots() {
    let d = TempDir::new().unwrap();
    let cfg = config(d.path(), "eps = 0.02\nn = 400\nt_end = 2.0\nsnapshot_every = 1.0\n");
    let out = run(d.path(), &["--config", &cfg, "simulate"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dist = std::fs::read_to_string(d.path().join("distance.csv")).unwrap();
    assert!(dist.starts_with("t,d_orbital\n"));
    assert_eq!(dist.lines().count(), 4);
    for f in ["snapshot_0000.csv", "snapshot_0002.csv", "simulate.json", "simulate.plt"] {
        assert!(d.path().join(f).exists(), "missing {f}");
    }
}

#[test]
fn spectrum_counts_two_small_eigenvalues() {
    let d = TempDir::new().unwrap();
    let out = run(d.path(), &["spectrum", "--eps", "0.02"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let c = json(&d.path().join("contours.json"));
    assert_eq!(c["r1"]["report"]["winding"], 2);
    assert_eq!(c["r2_rectangle"]["report"]["winding"], 0);
    assert_eq!(c["r3_check"]["all_ok"], true);
    assert!(c["lambda1"]["re"].as_f64().unwrap() < 0.0);
    for f in ["essential.csv", "r1_scan.csv", "r2_scan.csv", "spectrum.plt"] {
        assert!(d.path().join(f).exists(), "missing {f}");
    }
}

#[test]
fn sweep_keeps_failed_rows_in_the_table() {
    let d = TempDir::new().unwrap();
    let out = run(d.path(), &["sweep", "--eps", "0.03,0.025,0.02", "--jobs", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(d.path().join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("eps,status,c,z_ae,lambda1_evans,lambda1_pred"));
    // The shooter does not converge at 0.03; that row is reported, not fatal.
    let status: Vec<&str> = rows[1..].iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    assert!(status[0].starts_with("error"), "{csv}");
    assert_eq!(status[1..], ["ok", "ok"]);
    assert_eq!(rows[1].split(',').count(), 15);
    assert_eq!(json(&d.path().join("manifest.json"))["jobs"], 3);
}
