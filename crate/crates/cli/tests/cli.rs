use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_saddlescope"))
}

fn map_file(dir: &Path, a: f64, b: f64) -> std::path::PathBuf {
    let p = dir.join("map.cfg");
    fs::write(&p, format!("# test map\n[map]\nfamily = henon\na = {a}\nb = {b}\n")).unwrap();
    p
}

fn run(dir: &TempDir, a: f64, b: f64, args: &[&str]) -> Output {
    let map = map_file(dir.path(), a, b);
    bin().arg("--map").arg(&map).arg("--out-dir").arg(dir.path().join("out")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn orbits_in_the_horseshoe_pass() {
    let dir = TempDir::new().unwrap();
    let o = run(&dir, 6.0, 0.8, &["orbits", "--period-max", "4"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("out/orbits.csv")).unwrap();
    let rows = csv.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1 + 2 + 4 + 8 + 16, "header plus one row per fixed point of f^n");
    let bounds: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/bounds.json")).unwrap()).unwrap();
    assert!(bounds.is_object());
}

#[test]
fn orbits_with_missing_points_fail() {
    let dir = TempDir::new().unwrap();
    let o = run(&dir, 1.0, 0.3, &["orbits", "--period-max", "3"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn empty_render_window_is_inconclusive() {
    let dir = TempDir::new().unwrap();
    let o = run(&dir, 6.0, 0.8, &["render", "--window=4.0,4.0,4.2,4.2", "--set", "resolution=64"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("empty scene"));
    let svg = fs::read_to_string(dir.path().join("out/figure.svg")).unwrap();
    assert!(svg.contains("<svg"));
}

#[test]
fn configuration_errors_exit_3() {
    let dir = TempDir::new().unwrap();
    // window leaves V
    assert_eq!(code(&run(&dir, 6.0, 0.8, &["render", "--window=-9,-9,9,9"])), 3);
    // unknown key
    assert_eq!(code(&run(&dir, 6.0, 0.8, &["orbits", "--set", "colour=red"])), 3);
    // malformed value
    assert_eq!(code(&run(&dir, 6.0, 0.8, &["orbits", "--set", "period_max=ten"])), 3);
    // unknown subcommand
    assert_eq!(code(&run(&dir, 6.0, 0.8, &["frobnicate"])), 3);
    // missing map file
    let o = bin().args(["--map", "/nonexistent/map.cfg", "orbits"]).output().unwrap();
    assert_eq!(code(&o), 3);
    // zero threads
    let o = bin().env("SADDLESCOPE_THREADS", "0").args(["--map"]).arg(map_file(dir.path(), 6.0, 0.8)).arg("orbits").output().unwrap();
    assert_eq!(code(&o), 3);
}

#[test]
fn help_exits_0() {
    let o = bin().arg("--help").output().unwrap();
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["analyze", "orbits", "manifolds", "render", "tangency-hunt", "verify"] {
        assert!(text.contains(sub), "help lists {sub}");
    }
}

#[test]
fn hunt_brackets_the_boundary() {
    let dir = TempDir::new().unwrap();
    let o = run(&dir, 6.0, 0.8, &["tangency-hunt", "--b", "0.8", "--a-lo", "4.5", "--a-hi", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let hunt: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/hunt.json")).unwrap()).unwrap();
    let a_star = hunt["a_star"].as_f64().expect("a_star is a number");
    assert!((a_star - 4.6435).abs() < 1e-3, "a* = {a_star}");
    let events = fs::read_to_string(dir.path().join("out/events.jsonl")).unwrap();
    let events: Vec<serde_json::Value> = events.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(!events.is_empty());
    // a bracket without a sign change is a failure, not a crash
    let o = run(&dir, 6.0, 0.8, &["tangency-hunt", "--b", "0.8", "--a-lo", "5", "--a-hi", "6"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn artifacts_do_not_depend_on_thread_count() {
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let dir = TempDir::new().unwrap();
        let map = map_file(dir.path(), 6.0, 0.8);
        let o = bin()
            .env("SADDLESCOPE_THREADS", threads)
            .arg("--map")
            .arg(&map)
            .arg("--out-dir")
            .arg(dir.path().join("out"))
            .args(["render", "--set", "resolution=64"])
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let svg = fs::read(dir.path().join("out/figure.svg")).unwrap();
        let events = fs::read(dir.path().join("out/events.jsonl")).unwrap();
        outputs.push((svg, events, o.stdout));
    }
    assert!(outputs[0] == outputs[1], "render output differs between 1 and 4 threads");
}
