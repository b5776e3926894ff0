// SPDX-License-Identifier: Apache-2.0
//! Ground-truth judgement against a problem's golden testbench.
//!
//! Golden testbenches report in the same `MISMATCH`/`RESULT` grammar as the
//! synthesized ones; a sample is correct only on `RESULT pass`.

use std::fmt::Write as _;
use std::sync::LazyLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{PipelineOutcome, PipelineStatus, ProblemSpec, SimTrace};
use crate::testbench::{render_trace_replay, TestbenchError, REPLAY_MISS};
use crate::toolchain::{HdlRunner, TestRun, ToolchainError, Verdict};

static MODULE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^\s*module\s+([A-Za-z_][A-Za-z0-9_$]*)").unwrap());

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgement {
    pub golden_correct: bool,
    pub tb_pass: bool,
}

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("problem `{0}` has no golden testbench")]
    NoGolden(String),
    #[error("golden testbench of `{0}` declares no top module")]
    NoTop(String),
    #[error("golden testbench of `{id}` does not compile: {first}")]
    InvalidGolden { id: String, first: String },
    #[error("toolchain: {0}")]
    Toolchain(#[from] ToolchainError),
    #[error("reference replay: {0}")]
    Replay(#[from] TestbenchError),
}

/// The golden testbench and its top: the first module it defines other
/// than the design's own.
pub fn golden_testbench(spec: &ProblemSpec) -> Result<(&str, String), JudgeError> {
    let tb = spec.golden_testbench.as_deref().ok_or_else(|| JudgeError::NoGolden(spec.id.clone()))?;
    let top = MODULE
        .captures_iter(tb)
        .map(|c| c[1].to_string())
        .find(|m| *m != spec.module_name)
        .ok_or_else(|| JudgeError::NoTop(spec.id.clone()))?;
    Ok((tb, top))
}

/// A module with the spec's interface that drives zeros.
pub fn stub_module(spec: &ProblemSpec) -> String {
    let ports: Vec<String> = spec.ports.iter().map(|p| format!("  {}", p.verilog_decl())).collect();
    let mut s = format!("module {} (\n{}\n);\n", spec.module_name, ports.join(",\n"));
    for p in spec.outputs() {
        let _ = writeln!(s, "  assign {} = {}'d0;", p.name, p.width);
    }
    s.push_str("endmodule\n");
    s
}

/// Fails with [`JudgeError::InvalidGolden`] when the golden testbench does
/// not build even against a stub of the interface.
pub fn check_golden(spec: &ProblemSpec, runner: &dyn HdlRunner, timeout: Duration) -> Result<(), JudgeError> {
    let (tb, top) = golden_testbench(spec)?;
    match runner.run(spec, &stub_module(spec), tb, &top, timeout)? {
        TestRun::CompileError(diags) => Err(JudgeError::InvalidGolden {
            id: spec.id.clone(),
            first: diags
                .iter()
                .find(|d| d.is_error())
                .map(|d| d.raw.clone())
                .unwrap_or_default(),
        }),
        _ => Ok(()),
    }
}

/// Runs `design` against the golden testbench. A compile failure is
/// blamed on the design unless the testbench also fails on a stub.
fn golden_pass(spec: &ProblemSpec, design: &str, runner: &dyn HdlRunner, timeout: Duration) -> Result<Option<String>, JudgeError> {
    let (tb, top) = golden_testbench(spec)?;
    match runner.run(spec, design, tb, &top, timeout)? {
        TestRun::Completed { report, stdout } if report.verdict == Verdict::Pass => Ok(Some(stdout)),
        TestRun::CompileError(_) => {
            check_golden(spec, runner, timeout)?;
            Ok(None)
        }
        _ => Ok(None),
    }
}

/// `tb_pass` is the pipeline's own verdict; `golden_correct` needs the
/// final design to pass the golden testbench. Samples that never produced
/// compiling Verilog are not simulated.
pub fn judge_sample(outcome: &PipelineOutcome, spec: &ProblemSpec, runner: &dyn HdlRunner, timeout: Duration) -> Result<Judgement, JudgeError> {
    let tb_pass = outcome.status == PipelineStatus::Pass;
    let skip = matches!(outcome.status, PipelineStatus::FailSyntax | PipelineStatus::FailReference)
        || outcome.verilog_source.trim().is_empty();
    if skip {
        return Ok(Judgement {
            golden_correct: false,
            tb_pass,
        });
    }
    let golden_correct = golden_pass(spec, &outcome.verilog_source, runner, timeout)?.is_some();
    Ok(Judgement { golden_correct, tb_pass })
}

/// Functional correctness of a reference model, read through its trace:
/// the trace rendered as a module must pass the golden testbench without
/// the stimulus leaving the recorded path.
pub fn judge_reference(spec: &ProblemSpec, trace: &SimTrace, runner: &dyn HdlRunner, timeout: Duration) -> Result<bool, JudgeError> {
    let module = render_trace_replay(spec, trace)?;
    Ok(golden_pass(spec, &module, runner, timeout)?.is_some_and(|out| !out.contains(REPLAY_MISS)))
}
