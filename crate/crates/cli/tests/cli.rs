//! The `vll` binary end to end: artifacts, diagnostics and error records.

use std::path::Path;
use std::process::Command;

use vll_cli::config::{parse_config_str, RunConfig};

fn vll(dir: &Path, args: &[&str]) -> (i32, serde_json::Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_vll"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env("VLL_THREADS", "1")
        .output()
        .unwrap();
    let code = out.status.code().unwrap();
    let err = std::fs::read_to_string(dir.join("error.json"))
        .map(|s| serde_json::from_str(&s).unwrap())
        .unwrap_or(serde_json::Value::Null);
    (code, err)
}

#[test]
fn small_converge_writes_a_rate_report() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("run");
    let (code, err) = vll(
        &d,
        &["converge", "--nx", "16", "--ny", "64", "--T", "0.02", "--eps", "0.2,0.1,0.05", "--plot", "svg"],
    );
    assert_eq!(code, 0, "{err}");
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("rate_report.json")).unwrap()).unwrap();
    for col in ["L2_u", "Linf_u", "L2_theta", "Linf_theta", "residual_L2", "Em_sup"] {
        assert!(r["slopes"][col]["slope"].is_number(), "{col}: {}", r["slopes"][col]);
    }
    assert_eq!(r["eps_values"].as_array().unwrap().len(), 3);
    assert!(d.join("rate_report.csv").exists() && d.join("rate_report.svg").exists());
    assert!(d.join("config.toml").exists() && !d.join("error.json").exists());
}

#[test]
fn diagnose_reads_back_a_solve() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("solve");
    let (code, err) = vll(&run, &["solve-viscous", "--nx", "16", "--ny", "48", "--T", "0.05", "--eps", "0.2"]);
    assert_eq!(code, 0, "{err}");
    let snaps = std::fs::read_dir(&run)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".vlls"))
        .count();
    assert!(snaps >= 2);
    let diag = tmp.path().join("diag");
    let (code, err) = vll(&diag, &["diagnose", "--input", run.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(diag.join("norms.csv")).unwrap();
    assert_eq!(csv.lines().count(), snaps + 1);
}

#[test]
fn failures_leave_a_record_and_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("a");
    let (code, err) = vll(&d, &["build-blayer", "--order", "3"]);
    assert_eq!(code, 2);
    assert_eq!(err["command"], "build-blayer");

    let d = tmp.path().join("b");
    let (code, err) = vll(&d, &["solve-viscous", "--eps", "1.5"]);
    assert_eq!(code, 2);
    assert_eq!(err["key"], "eps");

    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "command = \"residual\"\n[grid]\nnx = 16\nbogus = 1\n").unwrap();
    let d = tmp.path().join("c");
    let (code, err) = vll(&d, &["--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.to_string().contains("bogus"), "{err}");

    let d = tmp.path().join("d");
    let (code, _) = vll(&d, &["diagnose", "--input", tmp.path().join("missing").to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = RunConfig::default();
    let back = parse_config_str(&cfg.to_toml()).unwrap();
    assert!(back.unknown.is_empty());
    assert_eq!(back.config.to_toml(), cfg.to_toml());
}
