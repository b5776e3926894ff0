// SPDX-License-Identifier: Apache-2.0
//! Boundary to the external Python executor of reference models.
//!
//! The executor reads one job object on stdin and writes one result object
//! on stdout. Results can be recorded to and replayed from a JSONL file so
//! that runs need no interpreter.

mod vectors;

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::run_with_timeout;
use crate::model::{
    sha256_hex, BitVec, CoverageReport, CycleRecord, DesignKind, Logic, ProblemSpec, SimTrace, StimulusVector,
};

pub use vectors::{parse_vectors, VectorError, MAX_VECTORS};

/// Extra wall-clock allowance on top of the job's own limit before the
/// executor process is killed.
const KILL_GRACE: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessJob {
    pub model_source: String,
    pub test_vectors: Vec<BTreeMap<String, u64>>,
    pub port_widths: BTreeMap<String, u32>,
    pub kind: DesignKind,
    pub time_limit_s: f64,
}

impl HarnessJob {
    pub fn new(spec: &ProblemSpec, model_source: &str, vectors: &[StimulusVector], time_limit: Duration) -> Self {
        Self {
            model_source: model_source.to_string(),
            test_vectors: vectors
                .iter()
                .map(|v| v.iter().map(|(k, b)| (k.clone(), b.value())).collect())
                .collect(),
            port_widths: spec.data_port_widths(),
            kind: spec.kind,
            time_limit_s: time_limit.as_secs_f64(),
        }
    }

    /// Content address used by the replay harness.
    pub fn digest(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("job serializes").as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HarnessStatus {
    Ok,
    SyntaxError,
    RuntimeError,
    Timeout,
    ContractViolation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireCycle {
    pub cycle_index: u64,
    pub inputs: BTreeMap<String, u64>,
    pub outputs: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<BTreeMap<String, serde_json::Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessResult {
    pub status: HarnessStatus,
    #[serde(default)]
    pub error_text: String,
    #[serde(default)]
    pub trace: Vec<WireCycle>,
    #[serde(default)]
    pub coverage: Option<CoverageReport>,
}

impl HarnessResult {
    pub fn failure(status: HarnessStatus, error_text: impl Into<String>) -> Self {
        Self {
            status,
            error_text: error_text.into(),
            trace: Vec::new(),
            coverage: None,
        }
    }

    /// Converts an `ok` result into a typed trace and coverage report.
    ///
    /// Anything the executor got wrong (length, ports, widths, coverage
    /// arithmetic) comes back as a contract violation naming the problem,
    /// so the caller can feed it to the model like any other failure.
    pub fn into_trace(self, spec: &ProblemSpec, job: &HarnessJob) -> Result<(SimTrace, CoverageReport), HarnessResult> {
        let violation = |msg: String| HarnessResult::failure(HarnessStatus::ContractViolation, msg);
        if self.status != HarnessStatus::Ok {
            return Err(self);
        }
        let coverage = self.coverage.ok_or_else(|| violation("executor returned no coverage report".into()))?;
        coverage.validate().map_err(|e| violation(format!("bad coverage report: {e}")))?;
        if self.trace.len() != job.test_vectors.len() {
            return Err(violation(format!(
                "trace has {} cycles for {} input vectors",
                self.trace.len(),
                job.test_vectors.len()
            )));
        }
        let mut cycles = Vec::with_capacity(self.trace.len());
        for (i, (wire, applied)) in self.trace.into_iter().zip(&job.test_vectors).enumerate() {
            if &wire.inputs != applied {
                return Err(violation(format!("cycle {i}: recorded inputs differ from the applied vector")));
            }
            let mut outputs = BTreeMap::new();
            for port in spec.outputs() {
                let v = *wire
                    .outputs
                    .get(&port.name)
                    .ok_or_else(|| violation(format!("cycle {i}: step() did not return output `{}`", port.name)))?;
                let bits = BitVec::new(port.width, v).map_err(|_| {
                    violation(format!(
                        "cycle {i}: output `{}` = {v} does not fit in {} bits",
                        port.name, port.width
                    ))
                })?;
                outputs.insert(port.name.clone(), Logic::Known(bits));
            }
            if let Some(extra) = wire.outputs.keys().find(|k| spec.outputs().all(|p| &p.name != *k)) {
                return Err(violation(format!("cycle {i}: step() returned undeclared output `{extra}`")));
            }
            let inputs = spec
                .inputs()
                .map(|p| {
                    let v = applied.get(&p.name).copied().unwrap_or(0);
                    (p.name.clone(), BitVec::new(p.width, v).expect("applied vectors fit their ports"))
                })
                .collect();
            let state = wire.state.map(|m| {
                m.into_iter()
                    .map(|(k, v)| {
                        let s = match v {
                            serde_json::Value::String(s) => s,
                            other => other.to_string(),
                        };
                        (k, s)
                    })
                    .collect()
            });
            cycles.push(CycleRecord {
                cycle_index: i as u64,
                inputs,
                outputs,
                state,
            });
        }
        Ok((SimTrace::new(cycles), coverage))
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("could not start executor `{program}`: {source}")]
    Spawn {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("executor exited with {code:?}: {stderr}")]
    Internal { code: Option<i32>, stderr: String },
    #[error("executor wrote an unreadable result: {0}")]
    Protocol(String),
    #[error("no recorded executor result for job {digest}")]
    ReplayMiss { digest: String },
    #[error("executor transcript {path}: {reason}")]
    Transcript { path: PathBuf, reason: String },
}

/// Runs a job to completion. Failures of the model itself are results, not
/// errors; errors mean the executor could not be used at all.
pub trait ModelHarness: Send + Sync {
    fn execute(&self, job: &HarnessJob) -> Result<HarnessResult, HarnessError>;
}

/// Spawns the executor for every job.
#[derive(Debug, Clone)]
pub struct ProcessHarness {
    argv: Vec<String>,
}

impl ProcessHarness {
    pub fn new(argv: Vec<String>) -> Self {
        assert!(!argv.is_empty(), "executor command must be nonempty");
        Self { argv }
    }

    pub fn argv(&self) -> &[String] {
        &self.argv
    }
}

impl ModelHarness for ProcessHarness {
    fn execute(&self, job: &HarnessJob) -> Result<HarnessResult, HarnessError> {
        let payload = serde_json::to_vec(job).expect("job serializes");
        let mut cmd = Command::new(&self.argv[0]);
        cmd.args(&self.argv[1..]);
        let limit = Duration::from_secs_f64(job.time_limit_s.max(0.0)) + KILL_GRACE;
        let out = run_with_timeout(cmd, Some(&payload), limit).map_err(|source| HarnessError::Spawn {
            program: self.argv[0].clone(),
            source,
        })?;
        if out.timed_out {
            return Ok(HarnessResult::failure(
                HarnessStatus::Timeout,
                format!("model did not finish within {:.1} s", job.time_limit_s),
            ));
        }
        if !out.success() {
            return Err(HarnessError::Internal {
                code: out.status.and_then(|s| s.code()),
                stderr: out.stderr.trim().to_string(),
            });
        }
        serde_json::from_str(out.stdout.trim()).map_err(|e| HarnessError::Protocol(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct HarnessRecord {
    digest: String,
    result: HarnessResult,
}

fn read_records(path: &Path) -> Result<BTreeMap<String, HarnessResult>, HarnessError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(BTreeMap::new()),
        Err(e) => {
            return Err(HarnessError::Transcript {
                path: path.into(),
                reason: e.to_string(),
            })
        }
    };
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let rec: HarnessRecord = serde_json::from_str(line).map_err(|e| HarnessError::Transcript {
            path: path.into(),
            reason: format!("line {}: {e}", i + 1),
        })?;
        map.entry(rec.digest).or_insert(rec.result);
    }
    Ok(map)
}

/// Serves recorded results keyed by job digest.
#[derive(Debug, Default)]
pub struct ReplayHarness {
    records: BTreeMap<String, HarnessResult>,
}

impl ReplayHarness {
    pub fn open(path: &Path) -> Result<Self, HarnessError> {
        if !path.exists() {
            return Err(HarnessError::Transcript {
                path: path.into(),
                reason: "file not found".into(),
            });
        }
        Ok(Self {
            records: read_records(path)?,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl ModelHarness for ReplayHarness {
    fn execute(&self, job: &HarnessJob) -> Result<HarnessResult, HarnessError> {
        let digest = job.digest();
        self.records.get(&digest).cloned().ok_or(HarnessError::ReplayMiss { digest })
    }
}

/// Delegates to another harness and appends every new result to a file.
pub struct RecordingHarness {
    inner: Box<dyn ModelHarness>,
    path: PathBuf,
    seen: Mutex<BTreeMap<String, HarnessResult>>,
}

impl RecordingHarness {
    pub fn open(inner: Box<dyn ModelHarness>, path: &Path) -> Result<Self, HarnessError> {
        Ok(Self {
            inner,
            path: path.into(),
            seen: Mutex::new(read_records(path)?),
        })
    }
}

impl ModelHarness for RecordingHarness {
    fn execute(&self, job: &HarnessJob) -> Result<HarnessResult, HarnessError> {
        let digest = job.digest();
        if let Some(r) = self.seen.lock().expect("record lock").get(&digest) {
            return Ok(r.clone());
        }
        let result = self.inner.execute(job)?;
        let mut seen = self.seen.lock().expect("record lock");
        // marked seen only once the line is on disk
        #[allow(clippy::map_entry)]
        if !seen.contains_key(&digest) {
            let line = serde_json::to_string(&HarnessRecord {
                digest: digest.clone(),
                result: result.clone(),
            })
            .expect("record serializes");
            let io = |e: std::io::Error| HarnessError::Transcript {
                path: self.path.clone(),
                reason: e.to_string(),
            };
            let mut f = OpenOptions::new().create(true).append(true).open(&self.path).map_err(io)?;
            writeln!(f, "{line}").map_err(io)?;
            seen.insert(digest, result.clone());
        }
        Ok(result)
    }
}
