use std::fs;
use std::path::Path;
use std::process::Command;

use aeul_study::cli::main_with_args;

fn aeul() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aeul"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, body).unwrap();
    path
}

const SHEAR: &str = "\
[experiment]
name = shear
n = 16
t_end = 0.5
sample_interval = 0.25
alphas = 0.5, 0.1, 0.01

[datum]
kind = shear
amplitude = 1
";

const SMOOTH: &str = "\
[experiment]
name = smooth
n = 32
n_ref = 64
t_end = 0.25
alphas = 0.0625, 0.03125, 0.015625
flows = true
seed = 7

[datum]
kind = smooth
slope = 2
k_max = 4
amplitude = 1
";

#[test]
fn bounds_prints_k() {
    let out = aeul()
        .args(["bounds", "--c1", "1", "--c2", "1", "--c", "1", "--T", "1", "--gamma0", "0", "--alphas", "0.01"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("alpha,t,K,flow_bound,vort_bound\n"));
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let k: f64 = row[2].parse().unwrap();
    assert!((k - 1.6176565479800037).abs() < 1e-12, "{k}");
}

#[test]
fn exit_codes() {
    assert_eq!(main_with_args(["aeul", "sweep", "--config", "missing.cfg"]), 1);
    assert_eq!(main_with_args(["aeul", "simulate", "--config", "missing.cfg"]), 1);
    assert_eq!(main_with_args(["aeul", "sweep", "--bogus"]), 1);
    assert_eq!(main_with_args(["aeul", "sweep"]), 1);
    assert_eq!(main_with_args(["aeul", "frobnicate"]), 1);
    assert_eq!(main_with_args(["aeul", "bounds", "--c1", "-1"]), 1);
    assert_eq!(main_with_args(["aeul", "--help"]), 0);
    let status = aeul().args(["sweep", "--config", "missing.cfg"]).status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn simulate_steady_shear_keeps_alpha_norm() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SHEAR);
    let out = tmp.path().join("sim");
    let code = main_with_args([
        "aeul",
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--alpha",
        "0.1",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let mut rdr = csv::Reader::from_path(out.join("monitors.csv")).unwrap();
    let col = rdr.headers().unwrap().iter().position(|h| h == "alpha_norm").unwrap();
    let norms: Vec<f64> = rdr.records().map(|r| r.unwrap()[col].parse().unwrap()).collect();
    assert!(norms.len() > 2);
    for m in &norms {
        assert!((m - norms[0]).abs() <= 1e-12 * norms[0], "{m} vs {}", norms[0]);
    }
    assert!(out.join("final.aeul").is_file());
}

fn sweep_into(cfg: &Path, out: &Path, workers: &str) {
    let code = main_with_args([
        "aeul",
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--workers",
        workers,
    ]);
    assert_eq!(code, 0);
}

#[test]
fn sweep_outputs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMOOTH);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    sweep_into(&cfg, &a, "1");
    sweep_into(&cfg, &b, "3");
    let sa = fs::read_to_string(a.join("sweep.csv")).unwrap();
    let sb = fs::read_to_string(b.join("sweep.csv")).unwrap();
    assert!(sa.starts_with('#'));
    let body = |s: &str| s.lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&sa), body(&sb));
    assert_eq!(sa.lines().nth(1).unwrap(), aeul_study::output::SWEEP_HEADER);
    assert_eq!(sa.lines().count(), 2 + 3 * 9);
    for f in ["sup_errors.csv", "bounds.csv", "summary.json", "plot.gp"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }

    let merged = tmp.path().join("merged");
    let code = main_with_args([
        "aeul",
        "report",
        "--input",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "--output",
        merged.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let m = fs::read_to_string(merged.join("merged.csv")).unwrap();
    assert_eq!(m.lines().count(), 1 + 2 * 3 * 9);
    assert!(merged.join("summary.csv").is_file() && merged.join("plot.gp").is_file());
}

#[test]
fn flows_command_writes_particles() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMOOTH);
    let out = tmp.path().join("flows");
    let code = main_with_args([
        "aeul",
        "flows",
        "--config",
        cfg.to_str().unwrap(),
        "--alpha",
        "0.01",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("flows.json")).unwrap()).unwrap();
    assert_eq!(json["alpha"], 0.01);
    let lines = fs::read_to_string(out.join("particles_alpha.csv")).unwrap().lines().count();
    assert_eq!(lines, 1 + 32 * 32);
}
