use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use exoshape_cli::gains::GainsFile;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_exoshape"))
}

fn demo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.json")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn summary(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("summary json")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

const PLANT: &str = r#""plant": {"J_m": 1.0, "B_m": 6.0, "K_s": 500.0, "J_j": 0.15, "K_c": 300.0}"#;

#[test]
fn design_gains_round_trip_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let gains = dir.path().join("gains.json");
    let s = summary(&run(&["design", "--config", p(&demo()), "--out", p(&gains)]));
    let text = std::fs::read_to_string(&gains).unwrap();
    let back = GainsFile::from_json(&text).unwrap();
    assert_eq!(back.to_json(), text);
    let dc = s["metrics"]["dc_amplification"].as_f64().unwrap();
    assert!((dc - 8.0).abs() < 0.08, "{dc}");
    assert!(s["stability"]["nominal_c7_passivity"]["violations"].as_array().unwrap().is_empty());
    assert!(!s["stability"]["realized_c7_passivity"]["violations"].as_array().unwrap().is_empty());
}

#[test]
fn identity_design_has_zero_feedback() {
    let dir = tempfile::tempdir().unwrap();
    let zeta = 6.0 / (2.0 * 500f64.sqrt());
    let zeta_hat = 6.0 / (2.0 * 300f64.sqrt());
    let cfg = write(
        dir.path(),
        "id.json",
        &format!(
            r#"{{{PLANT}, "design": {{"J_hat": 1.0, "B_hat": 6.0, "alpha": 1.0, "zeta": {zeta}, "zeta_hat": {zeta_hat}}}}}"#
        ),
    );
    let gains = dir.path().join("g.json");
    summary(&run(&["design", "--config", p(&cfg), "--out", p(&gains)]));
    let g = GainsFile::from_json(&std::fs::read_to_string(&gains).unwrap()).unwrap();
    assert!(g.feedback_is_zero(), "{:?} {:?}", g.sea, g.meta);
}

#[test]
fn minimal_config_echoes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "min.json", &format!(r#"{{{PLANT}, "design": {{"alpha": 8.0}}}}"#));
    let s = summary(&run(&["design", "--config", p(&cfg), "--out", p(&dir.path().join("g.json"))]));
    let d = &s["applied_defaults"];
    assert_eq!(d["design.zeta"], 1.0);
    assert_eq!(d["design.zeta_hat"], 0.8);
    assert_eq!(d["sim.dt_ctrl"], 0.001);
    assert_eq!(d["plant.T"], 0.002);
    assert!((d["design.filter_omega"].as_f64().unwrap() - 2.0 * std::f64::consts::PI * 50.0).abs() < 1e-12);
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", &format!(r#"{{{PLANT}, "design": {{"alpha": 0.5}}}}"#));
    let out = run(&["design", "--config", p(&cfg), "--out", p(&dir.path().join("g.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha >= 1"));

    let cfg = write(dir.path(), "typo.json", &format!(r#"{{{PLANT}, "design": {{"alpha": 8.0, "zeta_hatt": 1}}}}"#));
    let out = run(&["design", "--config", p(&cfg), "--out", p(&dir.path().join("g.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("design"));
}

#[test]
fn small_virtual_inertia_warns_in_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "w.json", &format!(r#"{{{PLANT}, "design": {{"J_hat": 0.15, "alpha": 4.0}}}}"#));
    let s = summary(&run(&["design", "--config", p(&cfg), "--out", p(&dir.path().join("g.json"))]));
    assert_eq!(s["warnings"].as_array().unwrap().len(), 1);
}

fn bode_rows(csv: &Path) -> Vec<[f64; 3]> {
    let mut rdr = csv::Reader::from_path(csv).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ["freq_hz", "mag_db", "phase_deg"]);
    rdr.deserialize().map(|r| r.unwrap()).collect()
}

#[test]
fn bode_ratio_starts_at_alpha_db() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    summary(&run(&[
        "bode", "--config", p(&demo()), "--out", p(&out), "--system", "ratio", "--fmin", "0.0001", "--fmax", "100",
        "--points", "50",
    ]));
    let rows = bode_rows(&out);
    assert_eq!(rows.len(), 50);
    assert!((rows[0][1] - 20.0 * 8f64.log10()).abs() < 0.01, "{}", rows[0][1]);
}

#[test]
fn bode_c7_realized_leaves_passive_band() {
    let dir = tempfile::tempdir().unwrap();
    let phase_range = |mode: &str| {
        let out = dir.path().join(format!("{mode}.csv"));
        summary(&run(&[
            "bode", "--config", p(&demo()), "--out", p(&out), "--system", "c7", "--mode", mode, "--fmin", "0.01",
            "--fmax", "300", "--points", "300",
        ]));
        let ph: Vec<f64> = bode_rows(&out).iter().map(|r| r[2]).collect();
        (ph.iter().copied().fold(f64::INFINITY, f64::min), ph.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    };
    let (lo, hi) = phase_range("nominal");
    assert!(lo >= -180.0 - 1e-6 && hi <= 1e-6, "{lo} {hi}");
    let (lo, hi) = phase_range("realized");
    assert!(lo < -180.0 || hi > 0.0, "{lo} {hi}");
}

#[test]
fn bode_two_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    summary(&run(&["bode", "--config", p(&demo()), "--out", p(&out), "--points", "2"]));
    let rows = bode_rows(&out);
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().flatten().all(|v| v.is_finite()));
}

#[test]
fn simulate_locked_output_demo() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let s = summary(&run(&["simulate", "--config", p(&demo()), "--out", p(&out)]));
    let r = s["metrics"]["tau_ratio_steady"].as_f64().unwrap();
    assert!((6.65..=7.35).contains(&r), "{r}");
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("t,theta_m,theta_j,theta_h,tau_s,tau_c,tau_m,delta_f,delta_hat\n"));
}

#[test]
fn simulate_hysteresis_pair() {
    let dir = tempfile::tempdir().unwrap();
    let s = summary(&run(&[
        "simulate", "--config", p(&config("hysteresis.json")), "--out", p(&dir.path().join("h.csv")),
    ]));
    let m = &s["metrics"];
    assert!(m["loop_area_ratio"].as_f64().unwrap() <= 0.2);
    let off = m["loop_area_off"].as_f64().unwrap();
    assert!((off - 40.0).abs() <= 4.0, "{off}");
}

#[test]
fn simulate_zero_duration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "z.json",
        &format!(r#"{{{PLANT}, "design": {{"alpha": 8.0}}, "sim": {{"duration": 0.0}}}}"#),
    );
    let out = dir.path().join("t.csv");
    let s = summary(&run(&["simulate", "--config", p(&cfg), "--out", p(&out)]));
    assert_eq!(s["metrics"]["samples"], 0);
    assert!(s["warnings"].as_array().unwrap().iter().any(|w| w.as_str().unwrap().contains("zero samples")));
    assert_eq!(
        std::fs::read_to_string(&out).unwrap(),
        "t,theta_m,theta_j,theta_h,tau_s,tau_c,tau_m,delta_f,delta_hat\n"
    );
}

#[test]
fn simulate_coupled_human_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let s = summary(&run(&[
        "simulate", "--config", p(&config("coupled.json")), "--out", p(&dir.path().join("c.csv")),
    ]));
    assert_eq!(s["metrics"]["verdict"], "unstable");
    assert_eq!(s["stability"]["coupled_human"]["verdict"], "unstable");
}

fn sweep(args: &[&str]) -> Vec<(f64, f64)> {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let mut all = vec!["sweep", "--config"];
    let cfg = demo();
    all.push(p(&cfg));
    all.extend(["--out", p(&out)]);
    all.extend(args);
    let o = run(&all);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    rdr.deserialize().map(|r| r.unwrap()).collect()
}

#[test]
fn sweep_alpha_dc_amplification() {
    let rows = sweep(&["--param", "design.alpha", "--values", "2,4,8", "--metric", "dc_amplification"]);
    for ((v, m), want) in rows.iter().zip([2.0, 4.0, 8.0]) {
        assert_eq!(*v, want);
        assert!((m - want).abs() < 0.01 * want);
    }
}

#[test]
fn sweep_delay_critical_omega_q_decreases() {
    let rows = sweep(&["--param", "plant.T", "--values", "0.001,0.002,0.004", "--metric", "critical_omega_q"]);
    assert_eq!(rows.len(), 3);
    assert!(rows[0].1 > rows[1].1 && rows[1].1 > rows[2].1);
}

#[test]
fn sweep_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let base = ["sweep", "--config", p(&demo()), "--out", p(&out)].map(String::from);
    let with = |extra: &[&str]| {
        let mut a: Vec<String> = base.to_vec();
        a.extend(extra.iter().map(|s| s.to_string()));
        bin().args(&a).output().unwrap()
    };
    let o = with(&["--param", "design.alpha", "--values", "", "--metric", "dc_amplification"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("values nonempty"));
    let o = with(&["--param", "design.bogus", "--values", "1", "--metric", "dc_amplification"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown parameter"));
    let o = with(&["--param", "design.alpha", "--values", "1", "--metric", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown metric"));
}

#[test]
fn dob_check_reports_margin() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.json");
    let s = summary(&run(&["dob-check", "--config", p(&demo()), "--out", p(&out)]));
    let crit = s["metrics"]["critical_omega_q"].as_f64().unwrap();
    assert!(crit > s["metrics"]["omega_q"].as_f64().unwrap());
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(written, s);
}

#[test]
fn summaries_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(&["design", "--config", p(&demo()), "--out", p(&dir.path().join("a.json"))]);
    let b = run(&["design", "--config", p(&demo()), "--out", p(&dir.path().join("b.json"))]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(
        std::fs::read(dir.path().join("a.json")).unwrap(),
        std::fs::read(dir.path().join("b.json")).unwrap()
    );
}

#[test]
fn missing_config_is_io_error() {
    let o = run(&["design", "--config", "/nonexistent/x.json", "--out", "/tmp/x"]);
    assert_eq!(o.status.code(), Some(1));
}
