use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use loopgroup::io::{read_frame, read_loop};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loopgroup"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const IDENTITY2: &str = r#"{"size":2,"terms":[{"deg":0,"matrix":[[[1,0],[0,0]],[[0,0],[1,0]]]}]}"#;
const DIAG_MONOMIAL: &str =
    r#"{"size":2,"terms":[{"deg":1,"matrix":[[[1,0],[0,0]],[[0,0],[0,0]]]},{"deg":-1,"matrix":[[[0,0],[0,0]],[[0,0],[1,0]]]}]}"#;

#[test]
fn identity_factors_trivially() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("id.json"), IDENTITY2).unwrap();
    let out = run(dir.path(), &["factor", "birkhoff", "id.json", "--out", "f"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let minus = read_loop(&dir.path().join("f/minus.json")).unwrap();
    let plus = read_loop(&dir.path().join("f/plus.json")).unwrap();
    let id = loopgroup::loops::LaurentLoop::identity(2);
    assert_eq!(minus.distance(&id).unwrap(), 0.0);
    assert!(plus.distance(&id).unwrap() < 1e-14);
    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("f/diagnostics.json")).unwrap()).unwrap();
    for key in ["residual", "smin", "winding", "indices"] {
        assert!(diag.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn monomial_loop_is_rejected_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("d.json"), DIAG_MONOMIAL).unwrap();
    let out = run(dir.path(), &["factor", "birkhoff", "d.json", "--out", "f"]);
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("in_big_cell=false det_winding=0"));
    assert!(dir.path().join("f/cell.json").exists());
}

#[test]
fn random_loop_iwasawa_and_reality() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["rand", "--form", "so-curved-flat(2,1)", "--degree", "2", "--seed", "11", "--out", "x.json"]);
    assert_eq!(code(&out), 0);
    let out = run(
        dir.path(),
        &["factor", "iwasawa", "x.json", "--form", "so-curved-flat", "--n", "2", "--k", "1", "--trunc", "12", "--out", "w"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("w/diagnostics.json")).unwrap()).unwrap();
    assert!(diag["residual"].as_f64().unwrap() <= 1e-8);
    assert!(diag["z_fixed_residual"].as_f64().unwrap() <= 1e-8);

    let out = run(dir.path(), &["verify", "reality", "--form", "so-curved-flat(2,1)", "--trials", "5", "--seed", "11"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("overall PASS"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["verify", "thm1"])), 1);
    assert_eq!(code(&run(dir.path(), &["verify", "nope", "--seed", "1"])), 1);
    assert_eq!(code(&run(dir.path(), &["factor", "birkhoff", "missing.json"])), 1);
    assert_eq!(code(&run(dir.path(), &["rand", "--form", "so-curved-flat(3,1)", "--seed", "1"])), 1);
    assert_eq!(code(&run(dir.path(), &["demo", "surface", "--grid", "5"])), 1);
}

#[test]
fn verify_writes_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    for out_dir in ["a", "b"] {
        let out = run(
            dir.path(),
            &["verify", "thm1", "--form", "un(2,-1)", "--trials", "8", "--seed", "7", "--out", out_dir],
        );
        assert_eq!(code(&out), 0);
    }
    for name in ["thm1.txt", "thm1.json"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}

#[test]
fn dress_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["demo", "flat", "--grid", "3x3@0.05", "--out", "flat"]);
    assert_eq!(code(&out), 0);
    let id4 = loopgroup::io::loop_to_json(&loopgroup::loops::LaurentLoop::identity(4));
    fs::write(dir.path().join("id4.json"), id4).unwrap();
    let out = run(dir.path(), &["dress", "flat/frame.jsonl", "id4.json", "--out", "dressed.jsonl"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let a = read_frame(&dir.path().join("flat/frame.jsonl")).unwrap();
    let b = read_frame(&dir.path().join("dressed.jsonl")).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!(x.distance(y).unwrap() < 1e-9);
    }

    let out = run(dir.path(), &["rand", "--form", "so-curved-flat(2,1)", "--seed", "3", "--out", "plus.json"]);
    assert_eq!(code(&out), 0);
    let out = run(dir.path(), &["dress", "flat/frame.jsonl", "plus.json", "--out", "bad.jsonl"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn surface_demo_on_a_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["demo", "surface", "--grid", "7x7@0.05", "--lambda0", "0.5i", "--seed", "7", "--out", "s"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("s/points.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x1,x2,p1,p2,p3,p4"));
    assert_eq!(lines.count(), 49);
    let obj = fs::read_to_string(dir.path().join("s/points.obj")).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 49);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("s/report.json")).unwrap()).unwrap();
    assert_eq!(report["immersion"]["path"], "sphere");
    assert_eq!(report["curvature"]["outcome"], "measured");

    let out = run(dir.path(), &["demo", "surface", "--grid", "5", "--lambda0", "1", "--seed", "7", "--out", "h"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("signature (3,1)"));
    assert!(!dir.path().join("h/points.csv").exists());
}
