use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use coachsim::coach::{validate_value, SchemaId, Validation, WORKED_EXAMPLE, WORKED_EXAMPLE_GOLDEN};
use serde_json::Value;

fn coachsim(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_coachsim"));
    if let Some(o) = out {
        cmd.arg("--out").arg(o);
    }
    cmd.args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = "n_learners = 30\nskill_counts = [3, 5]\n";

fn write(dir: &Path, name: &str, content: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, content).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn simulate_writes_tagged_tables_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("run");
    let o = coachsim(&["simulate", "--config", &cfg], Some(&out));
    assert!(o.status.success(), "{}", stderr(&o));

    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let hash = manifest["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert_eq!(manifest["master_seed"], 42);
    for f in ["summary.csv", "raw.csv", "significance.csv"] {
        let text = fs::read_to_string(out.join(f)).unwrap();
        assert!(text.starts_with(&format!("# manifest={hash}\n")), "{f}");
    }
    let raw = fs::read_to_string(out.join("raw.csv")).unwrap();
    assert_eq!(raw.lines().filter(|l| !l.starts_with('#')).count(), 1 + 30 * 2 * 3);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().filter(|l| !l.starts_with('#')).count(), 1 + 6);
}

#[test]
fn rerun_is_byte_identical_and_seed_flag_applies() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    assert!(coachsim(&["simulate", "--config", &cfg], Some(&a)).status.success());
    assert!(coachsim(&["--threads", "3", "simulate", "--config", &cfg], Some(&b)).status.success());
    assert!(coachsim(&["--seed", "7", "simulate", "--config", &cfg], Some(&c)).status.success());
    for f in ["summary.csv", "raw.csv", "significance.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
        assert_ne!(fs::read(a.join(f)).unwrap(), fs::read(c.join(f)).unwrap(), "{f}");
    }
    assert!(fs::read_to_string(c.join("raw.csv")).unwrap().contains("# master_seed=7"));
}

#[test]
fn bad_config_fails_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let typo = write(tmp.path(), "typo.toml", "n_lerners = 10\n");
    let o = coachsim(&["simulate", "--config", &typo], Some(&out));
    assert!(!o.status.success());
    assert!(stderr(&o).contains("n_lerners"), "{}", stderr(&o));
    assert!(!out.exists());

    let bad_value = write(tmp.path(), "bad.toml", "epsilon = 2.0\n");
    let o = coachsim(&["simulate", "--config", &bad_value], Some(&out));
    assert!(!o.status.success());
    assert!(stderr(&o).contains("epsilon"));
    assert!(!out.exists());
}

#[test]
fn analyze_round_trip_and_subsets() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let run = tmp.path().join("run");
    assert!(coachsim(&["simulate", "--config", &cfg], Some(&run)).status.success());
    let raw = run.join("raw.csv");
    let raw = raw.to_str().unwrap();

    let again = tmp.path().join("again");
    let o = coachsim(&["analyze", raw], Some(&again));
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["summary.csv", "significance.csv"] {
        assert_eq!(fs::read(run.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }

    let one = tmp.path().join("one");
    let o = coachsim(&["analyze", raw, "--policy", "uniform"], Some(&one));
    assert!(o.status.success());
    assert!(stderr(&o).contains("significance omitted"));
    assert!(one.join("summary.csv").exists() && !one.join("significance.csv").exists());

    let o = coachsim(&["analyze", raw, "--skill-count", "5"], None);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = stdout.lines().filter(|l| l.starts_with("uniform,") || l.starts_with("adaptive,")).collect();
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("5")));
    assert!(!rows.is_empty());
}

#[test]
fn analyze_rejects_truncated_records() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let run = tmp.path().join("run");
    assert!(coachsim(&["simulate", "--config", &cfg], Some(&run)).status.success());
    let raw = fs::read_to_string(run.join("raw.csv")).unwrap();
    let cut = write(tmp.path(), "cut.csv", &raw[..raw.len() - 4]);
    let o = coachsim(&["analyze", &cut], Some(&tmp.path().join("x")));
    assert!(!o.status.success());
    assert!(stderr(&o).contains("truncated"), "{}", stderr(&o));
    assert!(!tmp.path().join("x").join("summary.csv").exists());
}

#[test]
fn coach_reproduces_golden_file() {
    let tmp = tempfile::tempdir().unwrap();
    let ep = write(tmp.path(), "episode.json", WORKED_EXAMPLE);
    for name in ["a.json", "b.json"] {
        let out = tmp.path().join(name);
        let o = coachsim(&["coach", &ep, "--backend", "stub", "--zero-latencies"], Some(&out));
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(fs::read_to_string(&out).unwrap(), WORKED_EXAMPLE_GOLDEN);
    }
    // with real latencies the output still differs only in timing
    let o = coachsim(&["coach", &ep], None);
    let mut v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let golden: Value = serde_json::from_str(WORKED_EXAMPLE_GOLDEN).unwrap();
    v["stage_latencies_sec"] = golden["stage_latencies_sec"].clone();
    assert_eq!(v, golden);
}

#[test]
fn coach_names_the_bad_field() {
    let tmp = tempfile::tempdir().unwrap();
    let mut ep: Value = serde_json::from_str(WORKED_EXAMPLE).unwrap();
    ep["frames"][3].as_object_mut().unwrap().remove("timestamp_sec");
    let path = write(tmp.path(), "bad.json", &ep.to_string());
    let out = tmp.path().join("out.json");
    let o = coachsim(&["coach", &path], Some(&out));
    assert!(!o.status.success());
    assert!(stderr(&o).contains("frames[3].timestamp_sec"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn coach_robot_config_and_feedback() {
    let tmp = tempfile::tempdir().unwrap();
    let ep = write(tmp.path(), "episode.json", WORKED_EXAMPLE);
    let robot = write(tmp.path(), "robot.json", r#"{"stop_distance_to_door": 0.45, "pointing_angle": 40}"#);
    let o = coachsim(&["coach", &ep, "--robot-config", &robot, "--feedback", "the robot pointed the wrong direction, to the left"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["robot_config_before"]["stop_distance_to_door"], 0.45);
    assert_eq!(v["robot_config_after"]["stop_distance_to_door"], 0.4);
    assert_eq!(v["robot_config_after"]["pointing_angle"], 45.0);

    let bad = write(tmp.path(), "bad_robot.json", r#"{"stop_distance_to_door": 9, "pointing_angle": 0}"#);
    assert!(!coachsim(&["coach", &ep, "--robot-config", &bad], None).status.success());
}

#[test]
fn remote_transport_failure_leaves_no_output() {
    let tmp = tempfile::tempdir().unwrap();
    let ep = write(tmp.path(), "episode.json", WORKED_EXAMPLE);
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let out = tmp.path().join("out.json");
    let endpoint = format!("http://127.0.0.1:{port}/");
    let o = coachsim(&["coach", &ep, "--backend", "remote", "--endpoint", &endpoint, "--timeout-sec", "2"], Some(&out));
    assert!(!o.status.success());
    assert!(stderr(&o).contains("transport"), "{}", stderr(&o));
    assert!(!out.exists());
    assert!(!coachsim(&["coach", &ep, "--backend", "remote"], None).status.success());
}

#[test]
fn schemas_export_is_idempotent_and_self_validating() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("schemas");
    assert!(coachsim(&["schemas"], Some(&dir)).status.success());
    let first: Vec<(String, Vec<u8>)> = {
        let mut v: Vec<_> = fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
            .collect();
        v.sort();
        v
    };
    assert_eq!(first.len(), 5);
    assert!(coachsim(&["schemas"], Some(&dir)).status.success());
    for (name, bytes) in &first {
        assert_eq!(&fs::read(dir.join(name)).unwrap(), bytes, "{name} changed on rerun");
        let schema: Value = serde_json::from_slice(bytes).unwrap();
        let id: SchemaId = name.trim_end_matches(".schema.json").parse().unwrap();
        for example in schema["examples"].as_array().unwrap() {
            assert!(matches!(validate_value(example, id), Validation::Valid(_)), "{name}");
        }
    }
    // the shipped copies at the repository root match the export
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas");
    for (name, bytes) in &first {
        assert_eq!(&fs::read(shipped.join(name)).unwrap(), bytes, "shipped {name} is stale");
    }
}

#[test]
fn threads_zero_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let o = coachsim(&["--threads", "0", "simulate", "--config", &cfg], Some(&tmp.path().join("r")));
    assert!(!o.status.success());
}
