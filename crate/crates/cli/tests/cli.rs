use std::fs;
use std::process::Command;

fn coach() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coach"))
}

#[test]
fn run_writes_traces_that_eval_replays() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        r#"{"env": "tilt_maze", "student": "heterogeneous", "teachers": ["student_aware", "random_subskill"]}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = coach()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--seeds", "0..3", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for name in ["report.json", "report.csv", "long.csv"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let long = fs::read_to_string(out.join("long.csv")).unwrap();
    assert!(long.starts_with("teacher,seed,t,variable,subskill,value"));

    let trace = out.join("traces/student_aware/seed-1.jsonl");
    let output = coach().args(["eval", "--trace"]).arg(&trace).output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.contains("calibration 6, adaptive 14"), "{text}");
    assert!(text.contains("replay identical"), "{text}");
}

#[test]
fn rejects_bad_arguments() {
    let out = coach()
        .args(["run", "--config", "/nonexistent.json", "--out", "/tmp/x", "--seeds", "5..1"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = coach().args(["eval", "--trace", "/nonexistent.jsonl"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn compare_prints_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        r#"{"env": "tilt_maze", "student": "uniform", "teaching": {"horizon": 8},
            "teachers": ["student_aware", "oracle"], "seeds": {"start": 0, "end": 30}}"#,
    )
    .unwrap();
    let output = coach().args(["compare", "--config"]).arg(&config).output().unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.contains("student_aware - oracle"), "{text}");
}
