//! End-to-end smoke tests for the command-line binary: the generate → sample
//! → train → evaluate pipeline, study outputs, determinism across reruns, and
//! failure exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wsac-cli"));
    cmd.env("WSAC_LOG", "error");
    cmd
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn CLI");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_spec(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("spec.json");
    fs::write(&path, body).expect("write spec");
    path
}

#[test]
fn pipeline_generates_trains_and_evaluates() {
    let tmp = TempDir::new().expect("tempdir");
    let spec = write_spec(
        tmp.path(),
        r#"{
            "generator": {"n_states": 6, "n_actions": 3},
            "data": {"n_samples": [2000], "seeds": [0]},
            "wsac": {"k": 20}
        }"#,
    );
    let out = tmp.path().join("out");

    run_ok(bin()
        .arg("gen-cmdp")
        .args(["--spec", spec.to_str().unwrap()])
        .args(["--out", out.to_str().unwrap()]));
    let cmdp = out.join("cmdp.json");
    assert!(cmdp.exists(), "gen-cmdp writes cmdp.json");

    run_ok(bin()
        .arg("gen-data")
        .args(["--spec", spec.to_str().unwrap()])
        .args(["--cmdp", cmdp.to_str().unwrap()])
        .args(["--mix-p", "0.5"])
        .args(["--out", out.to_str().unwrap()]));
    let dataset = out.join("dataset.jsonl");
    assert!(dataset.exists(), "gen-data writes dataset.jsonl");

    run_ok(bin()
        .arg("train")
        .args(["--spec", spec.to_str().unwrap()])
        .args(["--data", dataset.to_str().unwrap()])
        .args(["--out", out.to_str().unwrap()]));
    let policy = out.join("policy.json");
    assert!(policy.exists(), "train writes policy.json");
    let trace = fs::read_to_string(out.join("trace.csv")).expect("trace.csv");
    assert!(trace.starts_with("k,"), "trace has the iteration header");
    assert_eq!(trace.lines().count(), 21, "header plus one line per iteration");

    let eval = run_ok(bin()
        .arg("eval")
        .args(["--spec", spec.to_str().unwrap()])
        .args(["--cmdp", cmdp.to_str().unwrap()])
        .args(["--policy", policy.to_str().unwrap()])
        .args(["--out", out.to_str().unwrap()]));
    let text = String::from_utf8(eval.stdout).expect("utf8");
    let parsed: serde_json::Value = serde_json::from_str(&text).expect("eval prints JSON");
    for key in ["j_r", "j_c", "norm_reward", "norm_cost", "safe"] {
        assert!(parsed.get(key).is_some(), "eval output has {key}");
    }
    assert!(out.join("eval.json").exists(), "eval also writes a file");
}

#[test]
fn figure_study_outputs_runs_traces_and_chart() {
    let tmp = TempDir::new().expect("tempdir");
    let spec = write_spec(
        tmp.path(),
        r#"{
            "generator": {"n_states": 5, "n_actions": 2},
            "data": {"n_samples": [500], "seeds": [0]},
            "wsac": {"k": 8},
            "sweep": {"mixture_p": [0.25, 0.75]}
        }"#,
    );
    let out = tmp.path().join("fig");
    run_ok(bin()
        .arg("figure1")
        .args(["--spec", spec.to_str().unwrap()])
        .args(["--out", out.to_str().unwrap()]));

    let runs = fs::read_to_string(out.join("runs.csv")).expect("runs.csv");
    assert!(runs.starts_with("run_id,seed,n,beta,"), "runs header");
    assert_eq!(runs.lines().count(), 3, "two sweep cells plus header");
    assert!(out.join("timings.csv").exists());
    let svg = fs::read_to_string(out.join("figure1.svg")).expect("chart");
    assert!(svg.starts_with("<svg") && svg.contains("polyline"));
    let traces = fs::read_dir(out.join("traces")).expect("traces dir").count();
    assert_eq!(traces, 2, "one trace per run");
}

#[test]
fn study_outputs_are_reproducible_byte_for_byte() {
    let tmp = TempDir::new().expect("tempdir");
    let spec = write_spec(
        tmp.path(),
        r#"{
            "generator": {"n_states": 5, "n_actions": 2},
            "data": {"n_samples": [400], "seeds": [0, 1]},
            "wsac": {"k": 6},
            "sweep": {"mixture_p": [0.5]}
        }"#,
    );
    let mut snapshots = Vec::new();
    for pass in 0..2 {
        let out = tmp.path().join(format!("pass{pass}"));
        run_ok(bin()
            .arg("figure1")
            .args(["--spec", spec.to_str().unwrap()])
            .args(["--out", out.to_str().unwrap()])
            .args(["--workers", "2"]));
        let mut bundle = String::new();
        for name in ["runs.csv", "figure1.svg"] {
            bundle.push_str(&fs::read_to_string(out.join(name)).expect(name));
        }
        snapshots.push(bundle);
    }
    assert_eq!(
        snapshots[0], snapshots[1],
        "deterministic outputs regardless of the worker pool"
    );
}

#[test]
fn missing_spec_fails_with_exit_one() {
    let out = bin()
        .arg("figure1")
        .args(["--spec", "/nonexistent/spec.json"])
        .args(["--out", "/tmp/unused"])
        .output()
        .expect("spawn CLI");
    assert_eq!(out.status.code(), Some(1), "I/O failures exit with 1");
}

#[test]
fn invalid_spec_field_is_rejected() {
    let tmp = TempDir::new().expect("tempdir");
    let spec = write_spec(tmp.path(), r#"{"generator": {"gamma": 1.5}}"#);
    let out = bin()
        .arg("gen-cmdp")
        .args(["--spec", spec.to_str().unwrap()])
        .args(["--out", tmp.path().join("out").to_str().unwrap()])
        .output()
        .expect("spawn CLI");
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("gamma") || err.contains("discount"), "{err}");
}

#[test]
fn seed_flag_changes_generated_instance() {
    let tmp = TempDir::new().expect("tempdir");
    let spec = write_spec(tmp.path(), r#"{"generator": {"n_states": 4, "n_actions": 2}}"#);
    let mut texts = Vec::new();
    for seed in ["3", "4"] {
        let out = tmp.path().join(format!("s{seed}"));
        run_ok(bin()
            .arg("gen-cmdp")
            .args(["--spec", spec.to_str().unwrap()])
            .args(["--seed", seed])
            .args(["--out", out.to_str().unwrap()]));
        texts.push(fs::read_to_string(out.join("cmdp.json")).expect("cmdp.json"));
    }
    assert_ne!(texts[0], texts[1], "different seeds give different models");
}
