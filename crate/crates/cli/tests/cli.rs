use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn parabola(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parabola")).args(args).env("NO_COLOR", "1").output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gauss_scan_moduli_take_three_values() {
    let out = parabola(&["gauss-scan", "--field", "7"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("a_index,b_index,re,im,modulus"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 49);
    for r in &rows {
        let (a, b, m) = (r[0], r[1], r[4]);
        let want = match (a == 0.0, b == 0.0) {
            (true, true) => 7.0,
            (false, true) => 0.0,
            _ => 7f64.sqrt(),
        };
        assert!((m - want).abs() < 1e-8 * 7.0, "({a}, {b}) -> {m}");
    }
}

#[test]
fn count_full_set() {
    let v = json(&parabola(&["count", "--field", "5", "--set", "full"]));
    assert_eq!(v["total"], 125);
    assert_eq!(v["trivial"], 25);
    assert_eq!(v["nontrivial"], 100);
}

#[test]
fn count_reads_bit_files() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("a.bits");
    // (0, 0) and (1, 1) = (0, 0) + (1, 1^2).
    std::fs::write(&file, "100\n010\n000\n").unwrap();
    let v = json(&parabola(&["count", "--field", "3", "--set", path_str(&file)]));
    assert_eq!(v["size"], 2);
    assert_eq!(v["nontrivial"], 1);
    assert_eq!(v["witness"]["z"], 1);
}

#[test]
fn bad_input_exits_with_two() {
    for args in [
        &["count", "--field", "6", "--set", "full"][..],
        &["count", "--field", "5", "--set", "/nonexistent/set.bits"],
        &["avoid", "--field", "11", "--mode", "exact"],
        &["gap-pipeline", "--set", "full:4", "--s", "2.9", "--A", "2", "--B", "3"],
        &["content", "--set", "full:3", "--s", "-1"],
        &["no-such-command"],
    ] {
        let out = parabola(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn avoid_writes_a_valid_witness() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("w.bits");
    let v = json(&parabola(&["avoid", "--field", "5", "--mode", "exact", "--out", path_str(&file)]));
    assert_eq!(v["size"], 10);
    let back = json(&parabola(&["count", "--field", "5", "--set", path_str(&file)]));
    assert_eq!(back["size"], 10);
    assert_eq!(back["nontrivial"], 0);
}

#[test]
fn reruns_are_byte_identical() {
    let runs = [
        &["error-bound", "--field", "5", "--pairs", "3", "--seed", "7"][..],
        &["avoid", "--field", "7", "--mode", "heuristic", "--seed", "3", "--iterations", "500"],
        &["gap-pipeline", "--set", "full:5", "--s", "2.9", "--A", "1", "--samples", "500"],
        &["functional", "--set", "full:2", "--A", "2", "--delta", "0.2", "--nodes", "256"],
    ];
    for args in runs {
        let a = parabola(args);
        let b = parabola(args);
        assert!(a.status.success(), "{args:?}: {}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        let mut seq = vec!["--exec", "seq"];
        seq.extend_from_slice(args);
        assert_eq!(parabola(&seq).stdout, a.stdout, "{args:?} sequential");
    }
}

#[test]
fn gap_report_has_the_documented_fields() {
    let v = json(&parabola(&["gap-pipeline", "--set", "full:5", "--s", "2.9", "--A", "1", "--samples", "500"]));
    for key in [
        "params",
        "dense_rect",
        "child_contents",
        "cell_mass_defect",
        "frostman_constant",
        "spectral_gap_value",
        "functional_value",
        "diagnostics",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    for key in ["I1", "I2", "I3"] {
        assert!(v["diagnostics"].get(key).is_some(), "missing diagnostics.{key}");
    }
    assert_eq!(v["child_contents"].as_array().unwrap().len(), 8);
    assert!(v["cell_mass_defect"].as_f64().unwrap() < 1e-6);
}

#[test]
fn frostman_measure_round_trips_through_energy() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("mu.txt");
    let v = json(&parabola(&[
        "frostman",
        "--set",
        "full:3",
        "--s",
        "2.9",
        "--out",
        path_str(&file),
        "--format",
        "rational",
        "--samples",
        "100",
    ]));
    assert_eq!(v["mass"], 1.0);
    let e = json(&parabola(&["energy", "--measure", path_str(&file), "--sigma", "1.5"]));
    assert!(e["direct"].as_f64().unwrap() > 0.0);
}

#[test]
fn functional_matches_diagnostic_total() {
    let v = json(&parabola(&["functional", "--set", "full:2", "--A", "2", "--delta", "0.1", "--B", "0.7"]));
    let value = v["value"].as_f64().unwrap();
    let d = &v["diagnostics"];
    let sum = d["I1"].as_f64().unwrap() + d["I2"].as_f64().unwrap() + d["I3"].as_f64().unwrap();
    assert!(value > 0.0);
    assert!((sum - value).abs() < 1e-9 * value);
}

#[test]
fn suite_prints_a_table() {
    let out = parabola(&["suite", "--quick", "--only", "1", "--only", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().filter(|l| l.starts_with("[PASS]")).count() == 2, "{text}");
    assert!(!text.contains('\x1b'));
}

#[test]
fn help_lists_every_subcommand() {
    let out = parabola(&["--help"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for cmd in [
        "count",
        "error-bound",
        "gauss-scan",
        "threshold",
        "avoid",
        "content",
        "frostman",
        "energy",
        "gap-pipeline",
        "functional",
        "suite",
    ] {
        assert!(text.contains(cmd), "{cmd}");
    }
}
