use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn moran(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moran")).args(args).output().expect("run moran")
}

fn config(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name].iter().collect();
    p.to_str().unwrap().to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn analyze_reports_skeleton_and_case() {
    let o = moran(&["analyze", &config("case1.cfg"), "--window", "6"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("s_1..s_6: 0 -1 2 1 4 3"), "{s}");
    assert!(s.contains("case: I"));
    assert!(s.contains("normalization: m = 1"));
    let o = moran(&["analyze", &config("case2.cfg")]);
    assert!(stdout(&o).contains("case: II, no breakpoints from k0 = 1"));
}

#[test]
fn tile_then_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("tile.json");
    let o = moran(&["tile", &config("tile_only.cfg"), "--k", "4", "--out", cert.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    assert_eq!(v["kind"], "tile");
    assert_eq!(v["record"]["digits"].as_array().unwrap().len(), 81);
    let o = moran(&["verify", &config("tile_only.cfg"), cert.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().last().unwrap() == "PASS");
}

#[test]
fn tile_refusal_names_the_collision() {
    let o = moran(&["tile", &config("collision.cfg"), "--k", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("witness (1, 2)"), "{}", stderr(&o));
}

#[test]
fn spectrum_round_trip_and_perturbation() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("spec.json");
    let o = moran(&["spectrum", &config("case1.cfg"), "--levels", "2", "--out", cert.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&cert).unwrap();
    let o = moran(&["verify", &config("case1.cfg"), cert.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));

    // bump one element of the last level
    let mut v: Value = serde_json::from_str(&text).unwrap();
    let els = v["run"]["levels"][1]["elements"].as_array_mut().unwrap();
    let x: i64 = els[1].as_str().unwrap().parse().unwrap();
    els[1] = Value::String((x + 1).to_string());
    let bad = write(dir.path(), "bad.json", &serde_json::to_string(&v).unwrap());
    let o = moran(&["verify", &config("case1.cfg"), &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).lines().last().unwrap().starts_with("FAIL"), "{}", stdout(&o));
}

#[test]
fn certificates_are_deterministic() {
    let a = moran(&["spectrum", &config("case2.cfg"), "--levels", "2"]);
    let b = moran(&["spectrum", &config("case2.cfg"), "--levels", "2"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn verify_against_another_system_is_a_fingerprint_error() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("tile.json");
    moran(&["tile", &config("tile_only.cfg"), "--k", "2", "--out", cert.to_str().unwrap()]);
    let o = moran(&["verify", &config("case1.cfg"), cert.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("fingerprint"), "{}", stderr(&o));
}

#[test]
fn hypothesis_violation_is_a_refusal() {
    let o = moran(&["spectrum", &config("tile_only.cfg")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("k = 2"), "{}", stderr(&o));
}

#[test]
fn plot_data_rows() {
    let o = moran(&["plot-data", &config("case1.cfg"), "mu_hat", "--k", "2", "--grid", "0:1:5"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    let rows: Vec<&str> = s.lines().collect();
    assert_eq!(rows[0], "x,abs_mu_hat");
    assert_eq!(rows.len(), 6);
    let first: Vec<f64> = rows[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first, vec![0.0, 1.0]);

    let o = moran(&["plot-data", &config("case1.cfg"), "q", "--levels", "2", "--grid", "0:1:4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for row in stdout(&o).lines().skip(1) {
        let q: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!((q - 1.0).abs() < 1e-9, "{row}");
    }

    let o = moran(&["plot-data", &config("case1.cfg"), "nu_tail", "--k", "1", "--grid", "3"]);
    let s = stdout(&o);
    assert_eq!(s.lines().next(), Some("x,abs_nu_tail,err"));
    assert_eq!(s.lines().count(), 4);
}

#[test]
fn resource_and_horizon_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let capped = write(
        dir.path(),
        "cap.cfg",
        "N = 3\nb.period = 3\nt.preperiod = [1]\nt.period = [4]\noption.element_cap = 10\n",
    );
    let o = moran(&["tile", &capped, "--k", "5"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let short = write(dir.path(), "short.cfg", "N = 2\nb.prefix = [18, 18]\nt.prefix = [1, 4]\n");
    let o = moran(&["spectrum", &short]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn usage_and_parse_errors_exit_3() {
    assert_eq!(moran(&[]).status.code(), Some(3));
    assert_eq!(moran(&["tile", &config("case1.cfg")]).status.code(), Some(3));
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.cfg", "N = 2\nb.period = 18\nt.period = [1, x]\n");
    let o = moran(&["analyze", &bad]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    let dup = write(dir.path(), "dup.cfg", "N = 2\nN = 3\nb.period = 18\nt.period = 1\n");
    assert_eq!(moran(&["analyze", &dup]).status.code(), Some(3));
    assert_eq!(moran(&["analyze", "/nonexistent/x.cfg"]).status.code(), Some(3));
}
