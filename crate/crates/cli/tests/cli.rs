use std::path::PathBuf;
use std::process::{Command, Output};

fn lyorad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lyorad"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .display()
        .to_string()
}

#[test]
fn simulate_writes_the_bundle() {
    let out = tempfile::tempdir().unwrap();
    let dir = out.path().to_str().unwrap();
    let run = lyorad(&["simulate", "--config", &config("defaults.hfd.toml"), "--out", dir]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    for f in ["summary.csv", "series.csv", "metadata.json"] {
        assert!(out.path().join(f).exists(), "{f} missing");
    }
    let meta = std::fs::read_to_string(out.path().join("metadata.json")).unwrap();
    assert!(meta.contains("\"config_hash\": \""));
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[material]\nrho = 500\nrho_dried = 600\n").unwrap();
    let run = lyorad(&["simulate", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("material.rho_dried"));

    let missing = lyorad(&["simulate", "--config", "/nonexistent/scenario.toml"]);
    assert_eq!(missing.status.code(), Some(2));

    let no_match = lyorad(&["validate", "--filter", "no such criterion"]);
    assert_eq!(no_match.status.code(), Some(2));
}

#[test]
fn validate_single_criterion_passes() {
    let run = lyorad(&["validate", "--filter", "1"]);
    assert!(run.status.success());
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("[PASS]  1 analytical view factors"));
}

#[test]
fn sweep_prints_a_row_per_value() {
    let run = lyorad(&[
        "sweep",
        "--config",
        &config("case6_inner.toml"),
        "--param",
        "h",
        "--values",
        "20,25 W/m2K,30",
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = String::from_utf8(run.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "h,vial_id,row,col,label,t_m_hours,t_dry_hours");
    assert_eq!(rows.len(), 4);
    let t_dry: Vec<f64> = rows[1..].iter().map(|r| r.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(t_dry[0] > t_dry[1] && t_dry[1] > t_dry[2], "{t_dry:?}");
}

#[test]
fn scalar_fit_reports_the_value() {
    let run = lyorad(&["fit", "--problem", &config("problems/case6_h.toml")]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = String::from_utf8(run.stdout).unwrap();
    let value: f64 = text.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!((value - 24.8).abs() < 0.1, "{text}");
}
