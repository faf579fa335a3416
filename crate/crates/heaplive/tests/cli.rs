//! End-to-end checks of the command-line interface: exit codes, output
//! determinism, and the JSON/DOT artifacts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn program(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/programs")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heaplive"))
        .args(args)
        .output()
        .expect("failed to spawn binary")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn dump_equations_renders_both() {
    let out = run(&[program("append.hl").to_str().unwrap(), "--dump-equations"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("xf[app,1](σ) = "));
    assert!(lines[1].starts_with("xf[app,2](σ) = "));
}

#[test]
fn query_live_and_dead() {
    let file = program("append.hl");
    let file = file.to_str().unwrap();
    let out = run(&[file, "--query", "29:w:10"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "LIVE");

    let out = run(&[file, "--query", "25:y:01"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "DEAD");

    let out = run(&[file, "--query", "29:w:"]);
    assert_eq!(stdout(&out).trim(), "LIVE");
}

#[test]
fn exit_codes() {
    let file = program("append.hl");
    let file = file.to_str().unwrap();

    // no action selected
    let out = run(&[file]);
    assert_eq!(out.status.code(), Some(2));

    // parse error with a location diagnostic
    let dir = std::env::temp_dir().join("heaplive_cli_parse");
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.hl");
    std::fs::write(&bad, "(let x").unwrap();
    let out = run(&[bad.to_str().unwrap(), "--dump-equations"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("syntax error"), "stderr: {err}");

    // malformed query
    let out = run(&[file, "--query", "notaquery"]);
    assert_eq!(out.status.code(), Some(2));

    // non-canonical query pattern
    let out = run(&[file, "--query", "29:w:2"]);
    assert_eq!(out.status.code(), Some(2));

    // unknown (point, variable) pair is an analysis fault
    let out = run(&[file, "--query", "0:nosuch:0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn json_deterministic_and_round_trips() {
    let file = program("append.hl");
    let file = file.to_str().unwrap();
    let dir = std::env::temp_dir().join("heaplive_cli_json");
    std::fs::create_dir_all(&dir).unwrap();
    let p1 = dir.join("r1.json");
    let p2 = dir.join("r2.json");

    for p in [&p1, &p2] {
        let out = run(&[file, "--trace", "--json-out", p.to_str().unwrap()]);
        assert!(out.status.success());
    }
    let j1 = std::fs::read(&p1).unwrap();
    let j2 = std::fs::read(&p2).unwrap();
    assert_eq!(j1, j2, "JSON output differs between identical runs");

    let report: heaplive::pipeline::AnalysisReport = serde_json::from_slice(&j1).unwrap();
    let again = serde_json::to_value(&report).unwrap();
    let original: serde_json::Value = serde_json::from_slice(&j1).unwrap();
    assert_eq!(again, original);
    assert!(!report.points.is_empty());
    assert_eq!(report.equations.len(), 2);
    let soundness = report.soundness.expect("soundness present with --trace");
    assert!(soundness.violations.is_empty());
    assert!(soundness.checked_points > 0);
}

#[test]
fn dot_files_deterministic() {
    let file = program("append.hl");
    let file = file.to_str().unwrap();
    let d1 = std::env::temp_dir().join("heaplive_cli_dot1");
    let d2 = std::env::temp_dir().join("heaplive_cli_dot2");
    for d in [&d1, &d2] {
        let _ = std::fs::remove_dir_all(d);
        let out = run(&[file, "--emit-dot", d.to_str().unwrap()]);
        assert!(out.status.success());
    }
    let mut names: Vec<String> = std::fs::read_dir(&d1)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.contains(&"p29_w.dot".to_string()), "files: {names:?}");
    assert!(names.contains(&"p25_y.dot".to_string()));
    for name in &names {
        let a = std::fs::read(d1.join(name)).unwrap();
        let b = std::fs::read(d2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("digraph"));
    }
}

#[test]
fn nullify_report_depth() {
    let file = program("append.hl");
    let file = file.to_str().unwrap();
    let out = run(&[file, "--nullify-report", "--depth", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.lines().any(|l| l == "pi=29 w.0 [unsafe-unchecked]"));
    assert!(text.lines().any(|l| l == "pi=29 y.ε [unsafe-unchecked]"));
    assert!(!text.contains("pi=29 w.1 ["));
    assert!(text.lines().all(|l| l.ends_with("[unsafe-unchecked]")));
}

#[test]
fn trace_is_line_oriented() {
    let file = program("append.hl");
    let file = file.to_str().unwrap();
    let out = run(&[file, "--trace"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.starts_with("visit p")));
    assert!(text.lines().any(|l| l.starts_with("use w.")));
    assert!(text
        .lines()
        .all(|l| l.starts_with("visit p") || l.starts_with("use ")));
}

#[test]
fn whole_corpus_analyzes() {
    for entry in
        std::fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/programs")).unwrap()
    {
        let path = entry.unwrap().path();
        let out = run(&[path.to_str().unwrap(), "--trace", "--json-out", "/dev/null"]);
        assert!(out.status.success(), "{path:?} failed");
    }
}
