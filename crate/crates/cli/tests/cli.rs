use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use num_complex::Complex64;
use seqstab::wcsim::{build_composite, grid_branches, nodal_solve, z0e, InjectionPort};
use seqstab::SystemSpec;

fn seqstab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqstab")).args(args).env_remove("SEQSTAB_OUT").output().unwrap()
}

fn run_ok(args: &[&str]) -> Output {
    let o = seqstab(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Numeric rows of a CSV file, skipping the schema and header lines.
fn rows(file: PathBuf) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(&file).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# schema=seqgrid/"));
    lines.next().unwrap();
    lines.map(|l| l.split(',').map(String::from).collect()).collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

fn json(file: PathBuf) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(file).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("in.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn compose_at_fifty_hertz_matches_nodal_solution() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["compose", "--alpha", "0.1", "--grid", "45:55:11", "--out", path(dir.path())]);
    let table = rows(dir.path().join("compose_zgpe.csv"));
    let row = table.iter().min_by(|a, b| (num(&a[0]) - 50.0).abs().total_cmp(&(num(&b[0]) - 50.0).abs())).unwrap();
    let f = num(&row[0]);
    assert!((f - 50.0).abs() < 1.0);
    let got = Complex64::new(num(&row[1]), num(&row[2]));
    let sys = SystemSpec::default();
    let m = build_composite(&sys, &sys.fault).unwrap();
    let s = Complex64::new(0.0, 2.0 * PI * f);
    let want = nodal_solve(&m, s, InjectionPort::PositiveWpp, Complex64::new(1.0, 0.0)).unwrap().driving_point;
    assert!((got - want).norm() <= 1e-9 * want.norm(), "{got} vs {want}");
}

#[test]
fn nyquist_winding_numbers_with_and_without_coupling() {
    let with = tempfile::tempdir().unwrap();
    let without = tempfile::tempdir().unwrap();
    run_ok(&["nyquist", "--no-sssi", "--out", path(without.path())]);
    run_ok(&["nyquist", "--out", path(with.path())]);
    let n_without = json(without.path().join("nyquist.json"))["results"]["verdict"]["n"].as_i64().unwrap();
    let n_with = json(with.path().join("nyquist.json"))["results"]["verdict"]["n"].as_i64().unwrap();
    assert_ne!(n_without, 0);
    assert_eq!(n_with, 0);
    let svg = std::fs::read_to_string(with.path().join("nyquist.svg")).unwrap();
    assert!(svg.contains("<polyline") && svg.contains(">-1</text>"));
    let curve = rows(with.path().join("nyquist.csv"));
    assert!(curve.len() > 100 && curve.iter().all(|r| r.len() == 3));
}

#[test]
fn unstable_verdict_exit_code_only_on_request() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(seqstab(&["nyquist", "--no-sssi", "--out", path(dir.path())]).status.code(), Some(0));
    let o = seqstab(&["nyquist", "--no-sssi", "--fail-on-unstable", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(3));
    // files are still written
    assert!(dir.path().join("nyquist.json").exists());
}

const SHORT_SCAN: &str = "[scan]\nsettle_s = 0.2\ntransient_s = 0.3\nwindow_s = 0.2\n";

#[test]
fn zero_sequence_fault_port_scan_on_passive_plant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT_SCAN);
    let out = dir.path().join("out");
    run_ok(&[
        "scan", "-c", path(&cfg), "--seq", "zero", "--port", "fault", "--passive", "--grid", "20:300:3", "--out",
        path(&out),
    ]);
    let table = rows(out.join("scan.csv"));
    assert_eq!(table.len(), 3);
    let sys = SystemSpec::default();
    let g = grid_branches(&sys, sys.fault.alpha).unwrap();
    let z0 = z0e(&g.z_01, &g.z_02).unwrap();
    for r in &table {
        assert_eq!(r[1], "zero");
        let f = num(&r[0]);
        let got = Complex64::new(num(&r[2]), num(&r[3]));
        let want = z0.eval_jw(2.0 * PI * f).unwrap();
        assert!((got.norm() / want.norm() - 1.0).abs() < 5e-3, "{f} Hz: {got} vs {want}");
    }
    let summary = json(out.join("scan.json"));
    assert_eq!(summary["results"]["measured"], 3);
}

#[test]
fn failed_scan_points_give_exit_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SHORT_SCAN}leakage_limit = 1e-30\n"));
    let o = seqstab(&[
        "scan", "-c", path(&cfg), "--port", "grid", "--passive", "--grid", "20:30:2", "--out", path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("20 Hz") && err.contains("leakage"), "{err}");
}

#[test]
fn config_errors_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    for (text, needle) in [
        ("[fault]\nalpha = 1.5\n", "FaultSpec"),
        ("[lines]\nr_l9_pu = 0.1\n", "unknown key"),
        ("[converter]\nl_f_mh = 3.0\n", "unit-suffix"),
        ("[converter]\nl_f_h = -1.0\n", "l_f"),
    ] {
        let cfg = write_config(dir.path(), text);
        let o = seqstab(&["compose", "-c", path(&cfg), "--out", path(dir.path())]);
        assert_eq!(o.status.code(), Some(1), "{text}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(needle), "{text}: {err}");
    }
    assert_eq!(seqstab(&["compose", "--alpha", "0", "--out", path(dir.path())]).status.code(), Some(1));
    assert_eq!(seqstab(&["no-such-command"]).status.code(), Some(1));
}

#[test]
fn empty_config_echoes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    run_ok(&["impedance", "-c", path(&cfg), "--grid", "1:100:5", "--out", path(dir.path())]);
    let echo = std::fs::read_to_string(dir.path().join("impedance.config.toml")).unwrap();
    assert!(echo.contains("r_l2_pu = 0.041"), "{echo}");
    let summary = json(dir.path().join("impedance.json"));
    assert_eq!(summary["config"]["lines"]["r_l2_pu"], 0.041);
}

#[test]
fn override_is_echoed_and_used() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("base");
    let changed = dir.path().join("changed");
    run_ok(&["impedance", "--grid", "1:100:5", "--out", path(&base)]);
    let cfg = write_config(dir.path(), "[converter]\nl_f_h = 0.0003\n");
    run_ok(&["impedance", "-c", path(&cfg), "--grid", "1:100:5", "--out", path(&changed)]);
    let echo = std::fs::read_to_string(changed.join("impedance.config.toml")).unwrap();
    assert!(echo.contains("l_f_h = 0.0003"));
    assert_ne!(std::fs::read(base.join("impedance.csv")).unwrap(), std::fs::read(changed.join("impedance.csv")).unwrap());
}

fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| !e.file_name().to_string_lossy().ends_with(".meta.json"))
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_ok(&["compare-sssi", "--grid", "0.5:1000:150", "--out", path(a.path())]);
    run_ok(&["compare-sssi", "--grid", "0.5:1000:150", "--out", path(b.path())]);
    let (fa, fb) = (data_files(a.path()), data_files(b.path()));
    assert!(fa.len() >= 7);
    assert_eq!(fa, fb);
    // metadata is the only place with a timestamp
    let meta = json(a.path().join("compare_sssi.meta.json"));
    assert!(meta["created_unix_s"].as_u64().unwrap() > 0);
}

#[test]
fn echoed_config_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let cfg = write_config(dir.path(), "[converter]\nk_pp = 0.5\n[plant]\nn_units = 100\nrebase = 1.5\n");
    run_ok(&["bode", "-c", path(&cfg), "--alpha", "0.3", "--no-sssi", "--grid", "1:500:60", "--out", path(&first)]);
    let echo = first.join("bode.config.toml");
    run_ok(&["bode", "-c", path(&echo), "--out", path(&second)]);
    assert_eq!(data_files(&first), data_files(&second));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_seqstab"))
        .args(["impedance", "--port", "grid", "--seq", "zero", "--grid", "1:10:3"])
        .env("SEQSTAB_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(rows(dir.path().join("impedance.csv")).len(), 3);
}

#[test]
fn bode_writes_both_curves_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["bode", "--grid", "1:1000:40", "--out", path(dir.path())]);
    for f in ["bode_zg.csv", "bode_zwp.csv"] {
        let t = rows(dir.path().join(f));
        assert_eq!(t.len(), 40);
        for r in &t {
            let (re, im, mag) = (num(&r[1]), num(&r[2]), num(&r[3]));
            assert!((re.hypot(im) - mag).abs() <= 1e-9 * mag);
        }
    }
    let svg = std::fs::read_to_string(dir.path().join("bode.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 4);
}
