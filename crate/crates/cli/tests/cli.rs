// SPDX-License-Identifier: Apache-2.0
//! End-to-end runs of the binary against a local chat-completions server,
//! recorded executor results and a shell stand-in for the simulator.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde_json::{json, Value};

const KEY: &str = "AUTOVERIFIX_API_KEY";

const FSM_GOOD: &str = "module seq_detect(input clk, input rst, input x, output z);
  reg s;
  always @(posedge clk) if (rst) s <= 1'b0; else s <= x;
  assign z = s & x;
endmodule";

fn harness_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/harness").join(name)
}

/// Answers reference-model prompts with the recorded FSM model and
/// everything else with a working design. Counts requests.
struct MockServer {
    url: String,
    hits: Arc<AtomicUsize>,
}

fn reply_for(request: &Value) -> String {
    let system = request["messages"][0]["content"].as_str().unwrap_or_default();
    if system.contains("Python") {
        let model = std::fs::read_to_string(harness_fixture("fsm11_model.py")).unwrap();
        format!(
            "```python\n{}\n```\nInitial tests:\n```json\n[{{\"x\": 1}}, {{\"x\": 1}}, {{\"x\": 0}}]\n```\n",
            model.trim_end()
        )
    } else {
        format!("```verilog\n{FSM_GOOD}\n```\n")
    }
}

fn serve() -> MockServer {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        length = v.trim().parse().unwrap_or(0);
                    }
                }
            }
            let mut body = vec![0; length];
            if reader.read_exact(&mut body).is_err() {
                continue;
            }
            counter.fetch_add(1, Ordering::SeqCst);
            let request: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
            let payload = json!({
                "choices": [{"message": {"role": "assistant", "content": reply_for(&request)}, "finish_reason": "stop"}],
                "usage": {"prompt_tokens": 10, "completion_tokens": 20}
            })
            .to_string();
            let _ = write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            );
        }
    });
    MockServer { url, hits }
}

fn problem(id: &str) -> Value {
    json!({
        "id": id,
        "description": "A Mealy machine reading x each clock; z is 1 when the previous and current x are both 1.",
        "module_name": "seq_detect",
        "ports": [
            {"name": "clk", "direction": "input", "width": 1, "role": "clock"},
            {"name": "rst", "direction": "input", "width": 1, "role": "reset"},
            {"name": "x", "direction": "input", "width": 1, "role": "data"},
            {"name": "z", "direction": "output", "width": 1, "role": "data"}
        ],
        "kind": "sequential",
        "golden_testbench": "module golden_tb;\n  seq_detect dut(.clk(1'b0), .rst(1'b0), .x(1'b0), .z());\nendmodule\n"
    })
}

fn write_problems(dir: &Path, ids: &[&str]) -> PathBuf {
    let path = dir.join("problems.jsonl");
    let text: String = ids.iter().map(|id| problem(id).to_string() + "\n").collect();
    std::fs::write(&path, text).unwrap();
    path
}

/// Config with one live backend at `url` and one replay backend.
fn write_config(dir: &Path, url: &str) -> PathBuf {
    let cfg = json!({
        "backends": {
            "mock": {"kind": "live", "base_url": url, "retry": {"max_retries": 0}},
            "canned": {"kind": "replay", "transcript": "canned.jsonl"}
        },
        "stage1_backend": "mock",
        "stage2_backend": "mock",
        "toolchain": {
            "compile_cmd": "cat {sources} > {artifact}",
            "run_cmd": "echo 'RESULT pass mismatches=0'",
            "timeout_s": 10.0
        },
        "harness": {"replay": harness_fixture("fsm11_runs.jsonl")}
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    std::fs::write(dir.join("canned.jsonl"), "").unwrap();
    path
}

fn autoverifix(args: &[&str], key: bool) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_autoverifix"));
    cmd.args(args).env("AUTOVERIFIX_LOG", "warn");
    if key {
        cmd.env(KEY, "test-key");
    } else {
        cmd.env_remove(KEY);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn digest_line(o: &Output) -> String {
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix("outcome digest ").map(str::to_string))
        .unwrap_or_else(|| panic!("no digest in output:\n{}", stdout(o)))
}

#[test]
fn run_writes_artifacts() {
    let server = serve();
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &server.url);
    let problems = write_problems(dir.path(), &["fsm_a"]);
    let out = dir.path().join("out");
    let o = autoverifix(&["run", s(&problems), "--config", s(&cfg), "--out", s(&out)], true);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("problem fsm_a: pass"), "{}", stdout(&o));
    for f in ["outcome.json", "reference_model.py", "test_vectors.json", "reference_trace.json", "testbench.v", "design.v", "iteration_log.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    assert!(std::fs::read_to_string(out.join("design.v")).unwrap().contains("module seq_detect"));
    let outcome: Value = serde_json::from_str(&std::fs::read_to_string(out.join("outcome.json")).unwrap()).unwrap();
    assert_eq!(outcome["status"], "pass");
    assert_eq!(server.hits.load(Ordering::SeqCst), 2);

    // an existing artifact directory needs --force
    let again = autoverifix(&["run", s(&problems), "--config", s(&cfg), "--out", s(&out)], true);
    assert_eq!(code(&again), 2, "{}", stderr(&again));
    assert!(stderr(&again).contains("--force"));
    let forced = autoverifix(&["run", s(&problems), "--config", s(&cfg), "--out", s(&out), "--force"], true);
    assert_eq!(code(&forced), 0, "{}", stderr(&forced));
    assert!(out.join("outcome.json").is_file());
}

#[test]
fn missing_key_is_a_configuration_error() {
    let server = serve();
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &server.url);
    let problems = write_problems(dir.path(), &["fsm_a"]);
    let o = autoverifix(&["run", s(&problems), "--config", s(&cfg), "--out", s(&dir.path().join("o"))], false);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains(KEY), "{}", stderr(&o));
    assert_eq!(server.hits.load(Ordering::SeqCst), 0);
}

#[test]
fn bad_problem_file_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "http://127.0.0.1:9/v1");
    let mut p = problem("broken");
    p.as_object_mut().unwrap().remove("module_name");
    let path = dir.path().join("bad.jsonl");
    std::fs::write(&path, p.to_string()).unwrap();
    let o = autoverifix(&["run", s(&path), "--config", s(&cfg), "--out", s(&dir.path().join("o"))], true);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("module_name"), "{}", stderr(&o));
}

#[test]
fn unknown_backend_override_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "http://127.0.0.1:9/v1");
    let problems = write_problems(dir.path(), &["fsm_a"]);
    let o = autoverifix(
        &["run", s(&problems), "--config", s(&cfg), "--stage2-backend", "nope", "--out", s(&dir.path().join("o"))],
        true,
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("nope"), "{}", stderr(&o));
}

#[test]
fn bench_resumes_and_regenerates() {
    let server = serve();
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &server.url);
    let problems = write_problems(dir.path(), &["fsm_a", "fsm_b", "fsm_c"]);
    let out = dir.path().join("sweep");
    let args = ["bench", s(&problems), "--config", s(&cfg), "--out", s(&out), "--samples", "2", "--jobs", "2"];
    let o = autoverifix(&args, true);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("pass@1"), "{}", stdout(&o));
    // one stage-1 call per problem, one stage-2 call per sample
    assert_eq!(server.hits.load(Ordering::SeqCst), 3 + 6);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["problems"].as_array().unwrap().len(), 3);
    assert_eq!(report["pass_at_k"][0]["value"], 1.0);
    for f in ["report.csv", "report.txt", "journal.jsonl", "manifest.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }

    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("wall_clock");
        v
    };
    let again = autoverifix(&args, true);
    assert_eq!(code(&again), 0, "{}", stderr(&again));
    assert_eq!(server.hits.load(Ordering::SeqCst), 9, "a finished sweep makes no calls");
    let resumed: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(strip(resumed), strip(report.clone()));

    std::fs::remove_file(out.join("report.json")).unwrap();
    let rep = autoverifix(&["report", "--out", s(&out)], false);
    assert_eq!(code(&rep), 0, "{}", stderr(&rep));
    let rebuilt: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(strip(rebuilt), strip(report));

    let zero = autoverifix(&["bench", s(&problems), "--config", s(&cfg), "--out", s(&out), "--samples", "0"], true);
    assert_eq!(code(&zero), 2);
}

#[test]
fn report_without_sweep_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = autoverifix(&["report", "--out", s(dir.path())], false);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("manifest.json"), "{}", stderr(&o));
}

#[test]
fn record_then_replay_is_identical() {
    let server = serve();
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &server.url);
    let problems = write_problems(dir.path(), &["fsm_a"]);
    let tx = dir.path().join("tx");
    std::fs::create_dir(&tx).unwrap();

    let rec = autoverifix(&["record", s(&problems), s(&tx), "--config", s(&cfg)], true);
    assert_eq!(code(&rec), 0, "{}", stderr(&rec));
    for f in ["stage1.jsonl", "stage2.jsonl", "harness.jsonl"] {
        assert!(tx.join(f).is_file(), "missing {f}");
    }
    let calls = server.hits.load(Ordering::SeqCst);

    // no key and no server traffic needed
    let a = autoverifix(&["replay", s(&problems), s(&tx), "--config", s(&cfg)], false);
    let b = autoverifix(&["replay", s(&problems), s(&tx), "--config", s(&cfg)], false);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(code(&b), 0, "{}", stderr(&b));
    assert_eq!(digest_line(&a), digest_line(&rec));
    assert_eq!(digest_line(&b), digest_line(&rec));
    assert_eq!(server.hits.load(Ordering::SeqCst), calls);

    // a transcript without the stage-2 exchange stops at the first miss
    std::fs::write(tx.join("stage2.jsonl"), "").unwrap();
    let miss = autoverifix(&["replay", s(&problems), s(&tx), "--config", s(&cfg)], false);
    assert_eq!(code(&miss), 1);
    let err = stderr(&miss);
    assert!(err.contains("digest"), "{err}");
    assert!(err.split(|c: char| !c.is_ascii_hexdigit()).any(|w| w.len() == 64), "{err}");
}

#[test]
fn record_needs_live_backends() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "http://127.0.0.1:9/v1");
    let problems = write_problems(dir.path(), &["fsm_a"]);
    let tx = dir.path().join("tx");
    std::fs::create_dir(&tx).unwrap();
    let o = autoverifix(&["record", s(&problems), s(&tx), "--config", s(&cfg), "--stage1-backend", "canned"], true);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("live"), "{}", stderr(&o));
}
