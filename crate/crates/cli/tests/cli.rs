use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_crystal-flow"));
    cmd.env_remove("CRYSTAL_FLOW_OUT");
    cmd
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.json"))
}

fn run(args: &[&str], files: &[&Path], out: &Path) -> Output {
    bin().args(args).arg("--out-dir").arg(out).args(files).output().unwrap()
}

fn write_scenario(dir: &Path, file: &str, body: &str) -> PathBuf {
    let path = dir.join(file);
    fs::write(&path, body).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn shipped_scenarios_pass_their_checks() {
    let out = TempDir::new().unwrap();
    for (action, name) in [
        ("simulate", "wulff-shrink"),
        ("simulate", "restart"),
        ("verify-identity", "identity-sweep"),
        ("catalog", "catalog"),
        ("classify", "classify"),
        ("translating-check", "translating"),
        ("translating-check", "double-rectangle"),
        ("audit", "audit"),
    ] {
        let o = run(&[action, "--check"], &[&scenario(name)], out.path());
        assert_eq!(
            o.status.code(),
            Some(0),
            "{name}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn wulff_shrink_settles_at_twice_root_alpha() {
    let out = TempDir::new().unwrap();
    let o = run(&["simulate"], &[&scenario("wulff-shrink")], out.path());
    assert!(o.status.success());
    let summary = read_json(&out.path().join("wulff-shrink/summary.json"));
    for l in summary["summary"]["final_lengths"].as_array().unwrap() {
        assert!((l.as_f64().unwrap() - 2.0).abs() < 1e-4);
    }
    let mut rdr = csv::Reader::from_path(out.path().join("wulff-shrink/series.csv")).unwrap();
    let energy: Vec<f64> = rdr.records().map(|r| r.unwrap()[11].parse().unwrap()).collect();
    assert!(energy.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
}

#[test]
fn malformed_input_exits_with_2() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("broken.json", "{ not json"),
        ("version.json", r#"{"schema": 9, "name": "v"}"#),
        ("unknown.json", r#"{"schema": 1, "name": "u", "colour": "red"}"#),
        ("nocurve.json", r#"{"schema": 1, "name": "n"}"#),
        (
            "inadmissible.json",
            r#"{"schema": 1, "name": "i", "curve": {"polygon": {"points": [[0,0],[1,1],[2,0]], "topology": "closed"}}}"#,
        ),
    ];
    for (file, body) in cases {
        let path = write_scenario(dir.path(), file, body);
        let o = run(&["simulate"], &[&path], dir.path());
        assert_eq!(o.status.code(), Some(2), "{file}");
    }
    let o = run(&["simulate"], &[&dir.path().join("missing.json")], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn action_mismatch_is_an_input_error() {
    let out = TempDir::new().unwrap();
    let o = run(&["audit"], &[&scenario("identity-sweep")], out.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_check_exits_with_1_only_under_check() {
    let dir = TempDir::new().unwrap();
    let path = write_scenario(
        dir.path(),
        "wrong.json",
        r#"{"schema": 1, "name": "wrong", "curve": {"wulff": {"radius": 2.0}},
            "integrator": {"max_time": 1.0}, "checks": {"final_length_all": {"value": 7.0, "tol": 1e-3}}}"#,
    );
    assert_eq!(run(&["simulate"], &[&path], dir.path()).status.code(), Some(0));
    let o = run(&["simulate", "--check"], &[&path], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let summary = read_json(&dir.path().join("wrong/summary.json"));
    assert_eq!(summary["checks"][0]["passed"], Value::Bool(false));
}

#[test]
fn batch_exit_code_is_the_worst_of_its_files() {
    let dir = TempDir::new().unwrap();
    let bad = write_scenario(dir.path(), "bad.json", "[]");
    let o = run(&["verify-identity"], &[&scenario("identity-sweep"), &bad], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(dir.path().join("identity-sweep/summary.json").exists());
}

fn files_in(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn identical_scenario_and_seed_give_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let path = write_scenario(
        dir.path(),
        "noisy.json",
        r#"{"schema": 1, "name": "noisy", "curve": {"wulff": {"radius": 1.5}},
            "perturbation": 0.2, "integrator": {"max_time": 2.0}}"#,
    );
    let runs: Vec<_> = ["a", "b", "c"]
        .iter()
        .zip([7, 7, 8])
        .map(|(sub, seed)| {
            let out = dir.path().join(sub);
            let o = run(&["simulate", "--seed", &seed.to_string()], &[&path], &out);
            assert!(o.status.success());
            files_in(&out.join("noisy"))
        })
        .collect();
    assert_eq!(runs[0].len(), 4);
    assert_eq!(runs[0], runs[1]);
    assert_ne!(runs[0], runs[2]);
}

#[test]
fn restart_series_drops_columns_at_the_epoch_change() {
    let out = TempDir::new().unwrap();
    assert!(run(&["simulate"], &[&scenario("restart")], out.path()).status.success());
    let mut rdr = csv::Reader::from_path(out.path().join("restart/series.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "t", "epoch", "n", "h_1", "h_2", "h_3", "h_4", "h_5", "h_6", "L_1", "L_2", "L_3", "L_4", "L_5", "L_6",
            "energy", "max_rate"
        ]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    let change = rows.iter().position(|r| &r[1] == "1").expect("no restart");
    assert_eq!(&rows[change - 1][2], "6");
    assert_eq!(&rows[change][2], "4");
    // the padded columns of the shorter epoch are empty
    for r in &rows[change..] {
        assert!(r[7].is_empty() && r[8].is_empty() && r[13].is_empty() && r[14].is_empty());
    }
    let epochs = read_json(&out.path().join("restart/epochs.json"));
    assert_eq!(epochs.as_array().unwrap().len(), 2);
    assert_eq!(epochs[1]["restart"]["segments_before"], 6);
    assert_eq!(epochs[1]["segments"], 4);
}

#[test]
fn first_snapshot_is_the_input_curve() {
    let out = TempDir::new().unwrap();
    assert!(run(&["simulate"], &[&scenario("restart")], out.path()).status.success());
    let snaps = read_json(&out.path().join("restart/snapshots.json"));
    let first = &snaps[0];
    assert_eq!(first["t"], 0.0);
    let pts: Vec<[f64; 2]> = serde_json::from_value(first["points"].clone()).unwrap();
    let input = [[0.0, 0.0], [0.0, 2.0], [1.0, 2.0], [1.0, 1.8], [2.0, 1.8], [2.0, 0.0]];
    assert_eq!(pts.len(), input.len());
    // same cyclic sequence, whatever the starting vertex
    let shift = pts
        .iter()
        .position(|p| (p[0] - input[0][0]).abs() + (p[1] - input[0][1]).abs() < 1e-12)
        .unwrap();
    for k in 0..input.len() {
        let p = pts[(k + shift) % pts.len()];
        assert!((p[0] - input[k][0]).abs() < 1e-12 && (p[1] - input[k][1]).abs() < 1e-12);
    }
    // after the restart the two steps have merged into one top side
    let last = &snaps[snaps.as_array().unwrap().len() - 1];
    assert_eq!(last["segments"].as_array().unwrap().len(), 4);
    assert_eq!(last["epoch"], 1);
}

#[test]
fn snapshot_outside_the_run_is_rejected() {
    let dir = TempDir::new().unwrap();
    let path = write_scenario(
        dir.path(),
        "late.json",
        r#"{"schema": 1, "name": "late", "curve": {"wulff": {"radius": 2.0}},
            "outputs": {"snapshots": [5.0]}}"#,
    );
    let o = run(&["simulate", "--max-time", "1"], &[&path], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn max_time_flag_caps_the_run() {
    let out = TempDir::new().unwrap();
    let o = run(
        &["simulate", "--max-time", "1.5"],
        &[&scenario("wulff-shrink")],
        out.path(),
    );
    assert!(o.status.success());
    let summary = read_json(&out.path().join("wulff-shrink/summary.json"));
    assert_eq!(summary["summary"]["status"], "max_time");
    assert!((summary["summary"]["final_time"].as_f64().unwrap() - 1.5).abs() < 1e-12);
}

#[test]
fn environment_variable_overrides_out_dir() {
    let dir = TempDir::new().unwrap();
    let (flag, env) = (dir.path().join("flag"), dir.path().join("env"));
    let o = bin()
        .env("CRYSTAL_FLOW_OUT", &env)
        .args(["verify-identity", "--out-dir"])
        .arg(&flag)
        .arg(scenario("identity-sweep"))
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(env.join("identity-sweep/summary.json").exists());
    assert!(!flag.exists());
}

#[test]
fn translating_check_reports_the_velocity() {
    let out = TempDir::new().unwrap();
    assert!(run(&["translating-check"], &[&scenario("translating")], out.path())
        .status
        .success());
    let s = read_json(&out.path().join("translating/summary.json"))["summary"].clone();
    let got = s["verdict"]["Accepted"]["velocity"].as_f64().unwrap();
    let want = s["expected_velocity"].as_f64().unwrap();
    assert!((got - want).abs() < 1e-10);
}
