// SPDX-License-Identifier: Apache-2.0
mod common;

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use autoverifix::harness::{
    HarnessError, HarnessJob, HarnessStatus, ModelHarness, ProcessHarness, RecordingHarness, ReplayHarness,
};
use autoverifix::model::{BitVec, StimulusVector};
use common::fsm_spec;

const OK_RESULT: &str = r#"{"status":"ok","error_text":"","trace":[
{"cycle_index":0,"inputs":{"x":1},"outputs":{"z":0},"state":{"state":"S1"}},
{"cycle_index":1,"inputs":{"x":1},"outputs":{"z":0},"state":{"state":"S11"}},
{"cycle_index":2,"inputs":{"x":0},"outputs":{"z":0},"state":{"state":"FOUND"}}],
"coverage":{"total_lines":20,"covered_lines":12,"ratio":0.6,"uncovered_lines":[5,6,9,10,14,15,18,19],"uncovered_branch_count":4}}"#;

fn script(dir: &Path, body: &str) -> ProcessHarness {
    let path = dir.join("executor.sh");
    fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    ProcessHarness::new(vec!["sh".into(), path.display().to_string()])
}

fn job(limit: Duration) -> HarnessJob {
    let v: Vec<StimulusVector> = [1u64, 1, 0]
        .iter()
        .map(|&x| [("x".to_string(), BitVec::new(1, x).unwrap())].into())
        .collect();
    HarnessJob::new(&fsm_spec(), "class Fsm:\n    pass\n", &v, limit)
}

#[test]
fn process_round_trip_and_stdin() {
    let dir = tempfile::tempdir().unwrap();
    let seen = dir.path().join("seen.json");
    let h = script(
        dir.path(),
        &format!("cat > '{}'\ncat <<'EOF'\n{OK_RESULT}\nEOF", seen.display()),
    );
    let j = job(Duration::from_secs(5));
    let r = h.execute(&j).unwrap();
    assert_eq!(r.status, HarnessStatus::Ok);
    let sent: HarnessJob = serde_json::from_str(&fs::read_to_string(&seen).unwrap()).unwrap();
    assert_eq!(sent, j);
    let (trace, cov) = r.into_trace(&fsm_spec(), &j).unwrap();
    assert_eq!(trace.len(), 3);
    assert_eq!(cov.uncovered_lines.len(), 8);
    assert_eq!(trace.cycles[2].state.as_ref().unwrap()["state"], "FOUND");
}

#[test]
fn failures_are_results_or_errors() {
    let dir = tempfile::tempdir().unwrap();
    let h = script(
        dir.path(),
        r#"cat >/dev/null; printf '%s\n' '{"status":"syntax_error","error_text":"  File \"model.py\", line 1\nSyntaxError: invalid syntax"}'"#,
    );
    let r = h.execute(&job(Duration::from_secs(5))).unwrap();
    assert_eq!(r.status, HarnessStatus::SyntaxError);
    assert!(r.error_text.contains("line 1"));

    let h = script(dir.path(), "cat >/dev/null; echo boom >&2; exit 4");
    assert!(matches!(h.execute(&job(Duration::from_secs(5))), Err(HarnessError::Internal { code: Some(4), .. })));

    let h = script(dir.path(), "cat >/dev/null; echo not json");
    assert!(matches!(h.execute(&job(Duration::from_secs(5))), Err(HarnessError::Protocol(_))));

    let h = ProcessHarness::new(vec!["/nonexistent/executor".into()]);
    assert!(matches!(h.execute(&job(Duration::from_secs(5))), Err(HarnessError::Spawn { .. })));
}

#[test]
fn runaway_executor_is_killed() {
    let dir = tempfile::tempdir().unwrap();
    let h = script(dir.path(), "sleep 60");
    let start = Instant::now();
    let r = h.execute(&job(Duration::from_millis(100))).unwrap();
    assert_eq!(r.status, HarnessStatus::Timeout);
    assert!(start.elapsed() < Duration::from_secs(10));
}

#[test]
fn record_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let counter = dir.path().join("calls");
    let h = script(
        dir.path(),
        &format!("cat >/dev/null; echo x >> '{}'\ncat <<'EOF'\n{OK_RESULT}\nEOF", counter.display()),
    );
    let tape = dir.path().join("harness.jsonl");
    let rec = RecordingHarness::open(Box::new(h), &tape).unwrap();
    let j = job(Duration::from_secs(5));
    let a = rec.execute(&j).unwrap();
    let b = rec.execute(&j).unwrap();
    assert_eq!(a, b);
    assert_eq!(fs::read_to_string(&counter).unwrap().lines().count(), 1);

    let replay = ReplayHarness::open(&tape).unwrap();
    assert_eq!(replay.len(), 1);
    assert_eq!(replay.execute(&j).unwrap(), a);
    let other = job(Duration::from_secs(6));
    assert!(matches!(replay.execute(&other), Err(HarnessError::ReplayMiss { .. })));
}
