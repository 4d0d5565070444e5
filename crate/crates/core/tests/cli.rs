use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_qhu");
const HEADER: &str = "T,b,G_re,G_im,theta_U,g_gen,g_arccos,well_defined";

fn write_config(dir: &TempDir, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn qhu(args: &[&str], config: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--config")
        .arg(config)
        .env_remove(qhu_core::cli::FAULT_ENV)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const MODEL_ONE: &str =
    "[model]\nmodel = two_level_t  # constant metric\nt = 2\nomega = 1\n\n[run]\nT = 1\n";

#[test]
fn phase_reports_one_row() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "m1.cfg", MODEL_ONE);
    let out = qhu(&["phase"], &cfg);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], HEADER);
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields.len(), 8);
    assert_eq!(fields[1], "");
    let g: f64 = fields[2].parse().unwrap();
    assert!((g - 0.448_535_614_668_364_5).abs() < 1e-6);
    assert_eq!(fields[4].parse::<f64>().unwrap(), 0.0);
    assert_eq!(fields[7], "true");
}

#[test]
fn zero_temperature_warns() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "cold.cfg",
        "[model]\nmodel = two_level_t\nt = 2\n[run]\nT = 0\n",
    );
    let out = qhu(&["phase"], &cfg);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let text = stdout(&out);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[4].parse::<f64>().unwrap(), std::f64::consts::PI);
}

#[test]
fn sweep_is_deterministic_across_job_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "pt.cfg",
        "[model]\nmodel = pt_equator\na = 5\nomega = 1\n[run]\nT_min = 0.5\nT_max = 8\nT_count = 6\nT_scale = log\nb_min = 0\nb_max = 4\nb_count = 3\nsteps = 64\n",
    );
    let one = dir.path().join("one.csv");
    let two = dir.path().join("two.csv");
    let o1 = qhu(
        &["sweep", "--jobs", "1", "--output", one.to_str().unwrap()],
        &cfg,
    );
    let o2 = qhu(
        &["sweep", "--jobs", "2", "--output", two.to_str().unwrap()],
        &cfg,
    );
    assert_eq!(o1.status.code(), Some(0));
    assert_eq!(o2.status.code(), Some(0));
    let a = fs::read(&one).unwrap();
    assert_eq!(a, fs::read(&two).unwrap());
    let text = String::from_utf8(a).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], HEADER);
    assert_eq!(rows.len(), 1 + 18);
    // row-major over (b, T)
    let b_of = |r: &str| r.split(',').nth(1).unwrap().parse::<f64>().unwrap();
    assert_eq!(b_of(rows[1]), 0.0);
    assert_eq!(b_of(rows[6]), 0.0);
    assert_eq!(b_of(rows[7]), 2.0);
}

#[test]
fn single_point_sweep_matches_phase() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "m1.cfg", MODEL_ONE);
    let phase = stdout(&qhu(&["phase"], &cfg));
    let sweep = stdout(&qhu(&["sweep"], &cfg));
    assert_eq!(phase, sweep);
}

#[test]
fn transitions_for_two_windings() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "tr.cfg",
        "[model]\nmodel = two_level_t\nt = 1.5\nomega = 2\n[run]\nT_min = 0.05\nT_max = 5\nT_count = 40\nsteps = 64\n",
    );
    let out = qhu(&["transitions"], &cfg);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let temps: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let expected = qhu_core::models::t_model_critical_temperatures(2).unwrap();
    assert_eq!(temps.len(), 2);
    assert!((temps[0] - expected[1]).abs() < 1e-5);
    assert!((temps[1] - expected[0]).abs() < 1e-5);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let broken = write_config(
        &dir,
        "broken.cfg",
        "[model]\nmodel = pt_equator\na = 4\nb = 5\n[run]\nT = 1\n",
    );
    let out = qhu(&["phase"], &broken);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("a^2 > b^2"));

    let syntax = write_config(&dir, "syntax.cfg", "[model]\nmodel two_level_t\n");
    let out = qhu(&["phase"], &syntax);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let missing = dir.path().join("absent.cfg");
    assert_eq!(qhu(&["phase"], &missing).status.code(), Some(3));

    let cfg = write_config(&dir, "m1.cfg", MODEL_ONE);
    let unwritable = dir.path().join("no/such/dir/out.csv");
    let out = qhu(&["sweep", "--output", unwritable.to_str().unwrap()], &cfg);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn check_passes_by_default() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "m1.cfg", MODEL_ONE);
    let out = qhu(&["check"], &cfg);
    let text = stdout(&out);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 10);
    assert!(!text.contains("FAIL"));
}

#[test]
fn injected_sylvester_fault_is_caught() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "m1.cfg", MODEL_ONE);
    let out = Command::new(BIN)
        .args(["check", "--config"])
        .arg(&cfg)
        .env(qhu_core::cli::FAULT_ENV, "1")
        .output()
        .unwrap();
    let text = stdout(&out);
    assert_ne!(out.status.code(), Some(0));
    let failed: Vec<&str> = text.lines().filter(|l| l.starts_with("FAIL")).collect();
    assert_eq!(failed.len(), 1, "{text}");
    assert!(failed[0].contains("sylvester_residual"));
}

#[test]
fn oracle_tolerance_calibration() {
    // The t-model connection is constant along the loop, so the midpoint
    // product is exact and the agreement floor (~1e-12) is set by the
    // finite-difference derivative. 1e-10 still passes; 1e-14 does not.
    let dir = TempDir::new().unwrap();
    let loose = write_config(
        &dir,
        "loose.cfg",
        &format!("{MODEL_ONE}steps = 1024\noracle_tol = 1e-10\n"),
    );
    let out = qhu(&["check"], &loose);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let tight = write_config(
        &dir,
        "tight.cfg",
        &format!("{MODEL_ONE}steps = 1024\noracle_tol = 1e-14\n"),
    );
    let out = qhu(&["check"], &tight);
    assert_eq!(out.status.code(), Some(2));
    let text = stdout(&out);
    let failed: Vec<&str> = text.lines().filter(|l| l.starts_with("FAIL")).collect();
    assert_eq!(failed.len(), 1, "{text}");
    assert!(failed[0].contains("closed_form_agreement"));
}
