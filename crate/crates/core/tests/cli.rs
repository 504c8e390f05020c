use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn alps(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alps"))
        .args(["--out-dir", dir.to_str().unwrap(), "--seed", "7"])
        .args(args)
        .env_remove("ALPS_SEED")
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("summary is JSON")
}

#[test]
fn simulate_then_transform() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "dimension = 32\n[simulation]\nsteps = 5000\n\
         [[modes]]\nlambda = 0.5\nr = 2.0\nweight = 0.5\n\
         [[modes]]\nlambda = 0.5\nr = 1.0\nweight = 0.5\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let o = alps(dir.path(), &["--config", cfg, "simulate"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(stdout_json(&o)["status"], "pass");
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("# seed=7 config_hash="));
    assert_eq!(trace.lines().count(), 5003);

    let o = alps(dir.path(), &["--config", cfg, "transform", "--svg"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for f in [
        "path_x.csv",
        "path_h.csv",
        "path_z.csv",
        "path_w.csv",
        "path_w.svg",
    ] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
}

#[test]
fn appendix_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = alps(dir.path(), &["appendix-verify"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(dir.path().join("appendix_sweep.csv").exists());
}

#[test]
fn demo_output_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = alps(d.path(), &["demo", "--steps", "50000", "--svg"]);
        assert!(o.status.code().unwrap() <= 1);
    }
    for f in [
        "fig1_marginal.csv",
        "fig2_beta_trace.csv",
        "fig3_transformed_trace.csv",
        "fig2_beta_trace.svg",
        "demo.json",
    ] {
        let x = fs::read(a.path().join(f)).unwrap();
        let y = fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between runs");
    }
}

#[test]
fn quanta_scan_reports_both_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let o = alps(
        dir.path(),
        &["complexity", "--spacing", "quanta", "--dims", "16,64"],
    );
    assert!(o.status.code().unwrap() <= 1);
    let rows = fs::read_to_string(dir.path().join("complexity_rows.csv")).unwrap();
    let header = rows.lines().nth(1).unwrap();
    assert!(header.contains("ratio_d_log2"));
    assert!(header.split(',').any(|c| c == "ratio_d"));
}

#[test]
fn bad_config_exits_with_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(
        &cfg,
        "dimension = 0\nbogus = 1\n[[modes]]\nlambda = 1.0\nr = 2.0\nweight = 0.4\n",
    )
    .unwrap();
    let o = alps(dir.path(), &["--config", cfg.to_str().unwrap(), "simulate"]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).expect("JSON on stderr");
    assert!(err.to_string().contains("bogus"), "{err}");
}
