use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use tempfile::TempDir;

const RING_DSL: &str = "process 0 { send tag=1 to 2; send tag=2 to 1; }
process 1 { recv tag=2 from 0; send tag=3 to 2; }
process 2 { recv tag=3 from 1; recv tag=1 from 0; }
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_seqcheck"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_stdin(args: &[&str], input: &str) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn check_exit_codes() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("ok.txt", "ab\nab\n", 0),
        ("dead.txt", "ab\nbc\nca\n", 2),
        ("illegal.txt", "a\na\na\n", 3),
        ("ring.dsl", RING_DSL, 2),
        ("broken.dsl", "process 0 { send tag=x to 1; }", 1),
    ];
    for (name, text, code) in cases {
        let p = write(&dir, name, text);
        assert_eq!(run(&["check", &p]).status.code(), Some(code), "{name}");
    }
    assert_eq!(run(&["check", "/nonexistent/model.txt"]).status.code(), Some(1));
}

#[test]
fn deadlock_json_report() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "ring.dsl", RING_DSL);
    let out = run(&["check", &p, "--format", "json"]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["verdict"], "deadlock");
    assert_eq!(v["matchedPairs"], 0);
    assert_eq!(v["residual"], 6);
    let blocked = v["blocked"].as_array().unwrap();
    let procs: Vec<_> = blocked.iter().map(|b| (b["process"].as_u64().unwrap(), b["position"].as_u64().unwrap())).collect();
    assert_eq!(procs, vec![(0, 0), (1, 0), (2, 0)]);
    assert_eq!(blocked[0]["envelope"]["destination"], 2);
    assert_eq!(v["stats"]["messages"], 6);
    assert_eq!(v["stats"]["distinctSignatures"], 3);
}

#[test]
fn illegal_text_report() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "three.txt", "a\na\na\n");
    let out = run(&["check", &p]);
    let text = stdout(&out);
    assert!(text.starts_with("verdict: illegal"), "{text}");
    assert!(text.contains("message a occurs in 3 processes (0, 1, 2)"), "{text}");
}

#[test]
fn parse_error_names_position() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "bad.dsl", "process 0 {\n  send tag=1 to 0;\n}\n");
    let out = run(&["check", &p]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("2:3"), "{err}");
}

#[test]
fn validate_only_skips_matching() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "dead.txt", "ab\nba\n");
    let out = run(&["check", &p, "--validate-only", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["verdict"], "ok");
    assert_eq!(run(&["check", &p]).status.code(), Some(2));
}

#[test]
fn mode_flags() {
    let dir = TempDir::new().unwrap();
    let abs = write(&dir, "m.txt", "ab\nab\n");
    let dsl = write(&dir, "m.dsl", RING_DSL);
    assert_eq!(run(&["check", &abs, "--mode", "strict"]).status.code(), Some(1));
    let out = run(&["check", &dsl, "--mode", "abstract", "--format", "json"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["blocked"][0]["envelope"], Value::Null);
}

#[test]
fn stream_matches_batch() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "dead.txt", "ab\nbc\nca\n");
    let batch = json(&run(&["check", &p, "--format", "json"]));
    let input = "append 1 b\nappend 0 a\nappend 2 c\nappend 2 a\nclose 2\nappend 0 b\nappend 1 c\nclose 0\nclose 1\nend\n";
    let out = run_stdin(&["stream", "--format", "json"], input);
    assert_eq!(out.status.code(), Some(2));
    let mut streamed = json(&out);
    let mut batch = batch;
    streamed["stats"]["steps"] = Value::Null;
    batch["stats"]["steps"] = Value::Null;
    assert_eq!(streamed, batch);
}

#[test]
fn stream_errors() {
    let out = run_stdin(&["stream"], "append 0 a\nappend 1 a\nclose 0\nclose 1\n");
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("without `end`"));

    let out = run_stdin(&["stream"], "append 0 a\nbogus\n");
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let out = run_stdin(&["stream"], "append 0 a\nend\n");
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn strict_stream() {
    let input = "append 0 1,0,1\nappend 1 1,0,1\nclose 0\nclose 1\nend\n";
    let out = run_stdin(&["stream", "--format", "json"], input);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["matchedPairs"], 1);
}

#[test]
fn oracle_backends() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "dead.txt", "ab\nbc\nca\n");
    let out = run(&["oracle", &p, "--backend", "cycle", "--format", "json"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["witness"].as_array().unwrap().len(), 3);
    let out = run(&["oracle", &p, "--backend", "simulate", "--format", "json"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["confluence"], "agreed");
}

#[test]
fn oracle_state_cap() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("big.dsl");
    let gen = run(&["gen", "--pattern", "pairs", "-P", "8", "-M", "6", "--out", p.to_str().unwrap()]);
    assert_eq!(gen.status.code(), Some(0));
    let out = run(&["oracle", p.to_str().unwrap(), "--backend", "simulate", "--cap", "10"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn gen_is_deterministic() {
    let a = run(&["gen", "--pattern", "random", "-P", "5", "-M", "8", "--seed", "42"]);
    let b = run(&["gen", "--pattern", "random", "-P", "5", "-M", "8", "--seed", "42"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["gen", "--pattern", "random", "-P", "5", "-M", "8", "--seed", "43"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn gen_ring_abstract() {
    let out = run(&["gen", "--pattern", "ring", "-P", "3", "-M", "1", "--format", "abstract"]);
    let text = stdout(&out);
    let rows: Vec<_> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows, vec!["P0: ab", "P1: bc", "P2: ca"]);
}

#[test]
fn gen_then_check() {
    let dir = TempDir::new().unwrap();
    for (pattern, code) in [("pairs", 0), ("ring", 2)] {
        let p = dir.path().join(format!("{pattern}.dsl"));
        let p = p.to_str().unwrap();
        assert_eq!(run(&["gen", "--pattern", pattern, "-P", "4", "-M", "3", "--out", p]).status.code(), Some(0));
        assert_eq!(run(&["check", p]).status.code(), Some(code), "{pattern}");
    }
    assert_eq!(run(&["gen", "--pattern", "ring", "-P", "1"]).status.code(), Some(1));
}

#[test]
fn bench_csv() {
    let out = run(&["bench", "--pattern", "random", "-P", "4", "-M", "20", "--seeds", "3", "--reps", "1", "--csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "backend,pattern,P,M,n,median_ms,steps");
    assert_eq!(lines.iter().filter(|l| l.starts_with("backend,")).count(), 1);
    assert_eq!(lines.len(), 1 + 3 * 2);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 7));
}

#[test]
fn usage_errors() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert!(Path::new(env!("CARGO_BIN_EXE_seqcheck")).exists());
}
