use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use dejaboom_core::dejaboom;
use dejaboom_core::session::parse_jsonl;
use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dejaboom"))
}

fn run_with_stdin(args: &[&str], stdin: &str) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

#[test]
fn play_wins_the_golden_script() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("run.jsonl");
    let script = fs::read_to_string(fixtures().join("designer/craft.txt")).unwrap();
    let out = run_with_stdin(&["play", "--provider", "rule", "--log", log.to_str().unwrap()], &script);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("You picked up the water bucket."));
    assert!(stdout.trim_end().ends_with("[Won on day 1, step 17]"), "{stdout}");
    let want = fs::read_to_string(fixtures().join("designer/craft.jsonl")).unwrap();
    let got = parse_jsonl(&fs::read_to_string(&log).unwrap()).unwrap();
    let want = parse_jsonl(&want).unwrap();
    let texts = |l: &[dejaboom_core::LogRecord]| l.iter().map(|r| r.text.clone()).collect::<Vec<_>>();
    assert_eq!(texts(&got), texts(&want));
}

#[test]
fn play_accepts_a_world_file() {
    let dir = tempfile::tempdir().unwrap();
    let world = dir.path().join("w.json");
    fs::write(&world, dejaboom().to_json()).unwrap();
    let out = run_with_stdin(&["play", "--world", world.to_str().unwrap()], "look\n");
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("[Running on day 1, step 1]"));
}

#[test]
fn analyze_reproduces_the_manifest() {
    let out_dir = tempfile::tempdir().unwrap();
    let f = fixtures();
    let out = bin()
        .args(["analyze", "--logs"])
        .arg(f.join("players"))
        .arg("--designer")
        .arg(f.join("designer"))
        .arg("--out")
        .arg(out_dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(out_dir.path().join("emergence.json")).unwrap()).unwrap();
    let manifest: Value = serde_json::from_str(&fs::read_to_string(f.join("emergence/manifest.json")).unwrap()).unwrap();
    for key in ["total", "unique", "categories"] {
        assert_eq!(report[key], manifest[key], "{key}");
    }
    for name in ["designer.json", "graph.json", "graph.dot"] {
        assert!(out_dir.path().join(name).is_file(), "{name}");
    }

    let graph = out_dir.path().join("graph.json");
    let export = bin().args(["graph", "export", "--format", "dot", "--graph"]).arg(&graph).output().unwrap();
    assert!(export.status.success());
    let dot = fs::read_to_string(out_dir.path().join("graph.dot")).unwrap();
    assert_eq!(String::from_utf8(export.stdout).unwrap(), dot);
    let export = bin().args(["graph", "export", "--format", "json", "--graph"]).arg(&graph).output().unwrap();
    assert_eq!(String::from_utf8(export.stdout).unwrap(), fs::read_to_string(&graph).unwrap());
}

fn stderr_error(out: &Output) -> Value {
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    err["error"].clone()
}

#[test]
fn validate_names_the_broken_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = dejaboom();
    spec.bomb.step_limit = 0;
    let world = dir.path().join("broken.json");
    fs::write(&world, spec.to_json()).unwrap();
    let out = bin().args(["validate", "--world"]).arg(&world).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_error(&out);
    assert_eq!(err["code"], "invalid_world");
    assert!(!err["invariant"].as_str().unwrap().is_empty());

    fs::write(&world, dejaboom().to_json()).unwrap();
    let out = bin().args(["validate", "--world"]).arg(&world).output().unwrap();
    assert!(out.status.success());

    fs::write(&world, "{ not json").unwrap();
    let out = bin().args(["validate", "--world"]).arg(&world).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_error(&out);
    assert_eq!(err["code"], "parse_error");
    assert_eq!(err["line"], 1);
}

#[test]
fn errors_are_json_on_stderr() {
    let out = bin().args(["graph", "export", "--graph", "/nonexistent/g.json"]).output().unwrap();
    assert!(!out.status.success());
    assert_eq!(stderr_error(&out)["code"], "io");
}
