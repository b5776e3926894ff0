// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::sync::LazyLock;
use thiserror::Error;

use super::bitvec::BitVec;
use super::trace::{Discrepancy, SimTrace};

/// Line coverage of a reference model run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub total_lines: u32,
    pub covered_lines: u32,
    pub ratio: f64,
    pub uncovered_lines: Vec<u32>,
    pub uncovered_branch_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoverageError {
    #[error("covered_lines {covered} exceeds total_lines {total}")]
    CoveredExceedsTotal { covered: u32, total: u32 },
    #[error("ratio {ratio} disagrees with {covered}/{total}")]
    RatioMismatch { ratio: String, covered: u32, total: u32 },
    #[error("{listed} uncovered lines listed, counts imply {implied}")]
    UncoveredCount { listed: usize, implied: u32 },
}

impl CoverageReport {
    /// Builds a report from counts; the ratio of an empty model is 1.
    pub fn from_counts(total_lines: u32, uncovered_lines: Vec<u32>, uncovered_branch_count: u32) -> Self {
        let covered = total_lines.saturating_sub(uncovered_lines.len() as u32);
        let ratio = if total_lines == 0 {
            1.0
        } else {
            covered as f64 / total_lines as f64
        };
        Self {
            total_lines,
            covered_lines: covered,
            ratio,
            uncovered_lines,
            uncovered_branch_count,
        }
    }

    pub fn validate(&self) -> Result<(), CoverageError> {
        if self.covered_lines > self.total_lines {
            return Err(CoverageError::CoveredExceedsTotal {
                covered: self.covered_lines,
                total: self.total_lines,
            });
        }
        let expect = if self.total_lines == 0 {
            1.0
        } else {
            self.covered_lines as f64 / self.total_lines as f64
        };
        if !(0.0..=1.0).contains(&self.ratio) || (self.ratio - expect).abs() > 1e-6 {
            return Err(CoverageError::RatioMismatch {
                ratio: self.ratio.to_string(),
                covered: self.covered_lines,
                total: self.total_lines,
            });
        }
        let implied = self.total_lines - self.covered_lines;
        if self.uncovered_lines.len() as u32 != implied {
            return Err(CoverageError::UncoveredCount {
                listed: self.uncovered_lines.len(),
                implied,
            });
        }
        Ok(())
    }

    pub fn percent(&self) -> f64 {
        self.ratio * 100.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// One compiler or interpreter message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub file: Option<String>,
    pub line: Option<u32>,
    pub message: String,
    /// The tool's own text, continuation lines included.
    pub raw: String,
}

static PY_LINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"File "([^"]+)", line (\d+)"#).unwrap());
static PY_BARE_LINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bline (\d+)\b").unwrap());

impl Diagnostic {
    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    pub fn error(message: impl Into<String>) -> Self {
        let message = message.into();
        Self {
            severity: Severity::Error,
            file: None,
            line: None,
            raw: message.clone(),
            message,
        }
    }

    /// Wraps interpreter error text (syntax error or traceback).
    ///
    /// The location is the last `File "...", line N` frame, which for a
    /// traceback is the innermost one.
    pub fn from_python_error(text: &str) -> Self {
        let text = text.trim_end();
        let (file, line) = match PY_LINE.captures_iter(text).last() {
            Some(c) => (Some(c[1].to_string()), c[2].parse().ok()),
            None => (None, PY_BARE_LINE.captures(text).and_then(|c| c[1].parse().ok())),
        };
        let message = text
            .lines()
            .rev()
            .find(|l| !l.trim().is_empty())
            .unwrap_or("error")
            .trim()
            .to_string();
        Self {
            severity: Severity::Error,
            file,
            line,
            message,
            raw: if text.is_empty() { "error".into() } else { text.to_string() },
        }
    }
}

/// Iteration caps and thresholds for both feedback stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunBudget {
    pub max_python_syntax_iters: u32,
    pub max_coverage_iters: u32,
    pub max_verilog_syntax_iters: u32,
    pub max_function_iters: u32,
    pub coverage_threshold: f64,
    #[serde(with = "secs")]
    pub sim_timeout: Duration,
    pub max_reported_discrepancies: usize,
}

pub(crate) mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

impl Default for RunBudget {
    fn default() -> Self {
        Self {
            max_python_syntax_iters: 5,
            max_coverage_iters: 5,
            max_verilog_syntax_iters: 5,
            max_function_iters: 5,
            coverage_threshold: 0.85,
            sim_timeout: Duration::from_secs(10),
            max_reported_discrepancies: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid budget: {0}")]
pub struct BudgetError(pub String);

impl RunBudget {
    pub fn validate(&self) -> Result<(), BudgetError> {
        if !(0.0..=1.0).contains(&self.coverage_threshold) {
            return Err(BudgetError("coverage_threshold must be within [0, 1]".into()));
        }
        let caps = [
            ("max_python_syntax_iters", self.max_python_syntax_iters),
            ("max_coverage_iters", self.max_coverage_iters),
            ("max_verilog_syntax_iters", self.max_verilog_syntax_iters),
            ("max_function_iters", self.max_function_iters),
        ];
        if let Some((name, _)) = caps.iter().find(|(_, v)| *v == 0) {
            return Err(BudgetError(format!("{name} must be at least 1")));
        }
        if self.max_reported_discrepancies == 0 {
            return Err(BudgetError("max_reported_discrepancies must be at least 1".into()));
        }
        if self.sim_timeout.is_zero() {
            return Err(BudgetError("sim_timeout must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Stage1,
    Stage2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    RefModelGen,
    PythonSyntaxFix,
    CoverageRefine,
    VerilogGen,
    VerilogSyntaxFix,
    FunctionFix,
    /// A transport-level retry inside one gateway call.
    Retry,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationEvent {
    pub stage: Stage,
    pub kind: EventKind,
    pub prompt_digest: String,
    pub response_digest: String,
    pub summary: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationLog {
    pub events: Vec<IterationEvent>,
}

impl IterationLog {
    pub fn push(&mut self, event: IterationEvent) {
        self.events.push(event);
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// Calls that reached the model (retries excluded).
    pub fn prompts(&self) -> usize {
        self.events.iter().filter(|e| e.kind != EventKind::Retry).count()
    }

    pub fn extend(&mut self, other: IterationLog) {
        self.events.extend(other.events);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineStatus {
    Pass,
    FailSyntax,
    FailFunction,
    FailReference,
    BudgetExhausted,
}

impl PipelineStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            PipelineStatus::Pass => "pass",
            PipelineStatus::FailSyntax => "fail_syntax",
            PipelineStatus::FailFunction => "fail_function",
            PipelineStatus::FailReference => "fail_reference",
            PipelineStatus::BudgetExhausted => "budget_exhausted",
        }
    }
}

/// One per-cycle stimulus: data input name to value.
pub type StimulusVector = BTreeMap<String, BitVec>;

/// Artifacts and audit trail of one end-to-end run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub problem_id: String,
    pub status: PipelineStatus,
    pub stage1_status: String,
    pub reference_source: String,
    pub test_vectors: Vec<StimulusVector>,
    pub reference_trace: SimTrace,
    pub testbench_source: String,
    pub verilog_source: String,
    pub coverage: Option<CoverageReport>,
    pub final_discrepancies: Vec<Discrepancy>,
    pub iteration_log: IterationLog,
}

impl PipelineOutcome {
    /// Content digest over the canonical JSON encoding.
    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("outcome serializes"))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
