// SPDX-License-Identifier: Apache-2.0
//! Verilog generation with syntax and function repair loops.

use serde::{Deserialize, Serialize};
use tracing::debug;

use super::{Llm, Session, StageError, NO_CODE};
use crate::llm::{extract_code_block, CodeTag};
use crate::model::{Diagnostic, Discrepancy, EventKind, IterationLog, ProblemSpec, RunBudget, SimTrace, Stage};
use crate::prompt::SourceLanguage;
use crate::testbench::TestbenchSource;
use crate::toolchain::{HdlRunner, TestRun, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage2Status {
    Pass,
    FailSyntax,
    FailFunction,
    /// The function budget ran out while the latest candidate timed out or
    /// produced unreadable simulation output, so no mismatch list exists.
    BudgetExhausted,
}

impl Stage2Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage2Status::Pass => "pass",
            Stage2Status::FailSyntax => "fail_syntax",
            Stage2Status::FailFunction => "fail_function",
            Stage2Status::BudgetExhausted => "budget_exhausted",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage2Iterations {
    /// Syntax repair prompts over the whole run.
    pub syntax: u32,
    pub function: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage2Result {
    pub status: Stage2Status,
    pub verilog_source: String,
    pub iterations: Stage2Iterations,
    pub final_discrepancies: Vec<Discrepancy>,
    pub log: IterationLog,
}

fn verilog_of(text: &str) -> Result<String, Diagnostic> {
    extract_code_block(text, CodeTag::Verilog)
        .map_err(|_| Diagnostic::error("the response contained no ```verilog block with the module"))
}

/// Generates the design and repairs it against `testbench` until it passes
/// or a budget runs out.
///
/// Each new candidate from a function fix gets a fresh syntax budget; the
/// function budget covers the whole run. `stimulus` is the trace the
/// testbench was built from and supplies the inputs shown with mismatches.
pub fn run_stage2(
    spec: &ProblemSpec,
    testbench: &TestbenchSource,
    stimulus: &SimTrace,
    llm: Llm<'_>,
    runner: &dyn HdlRunner,
    budget: &RunBudget,
) -> Result<Stage2Result, StageError> {
    let mut s = Session::new(llm, Stage::Stage2);
    let forge = llm.forge;
    let mut iters = Stage2Iterations::default();
    let mut syntax_this = 0u32;

    let text = s.ask(EventKind::VerilogGen, forge.render_verilog_gen_prompt(spec, llm.params)?)?;
    let mut design = verilog_of(&text);
    let mut last_source = design.clone().unwrap_or_default();
    loop {
        let run = match &design {
            Err(d) => TestRun::CompileError(vec![d.clone()]),
            Ok(src) => runner.run(spec, src, &testbench.source, &testbench.top, budget.sim_timeout)?,
        };
        let (discrepancies, note, timed_out_or_malformed) = match run {
            TestRun::CompileError(diags) => {
                let first = diags.iter().find(|d| d.is_error()).map(|d| d.message.clone()).unwrap_or_default();
                s.outcome(format!("does not compile: {first}"));
                if syntax_this >= budget.max_verilog_syntax_iters {
                    return Ok(finish(s, Stage2Status::FailSyntax, last_source, iters, Vec::new()));
                }
                syntax_this += 1;
                iters.syntax += 1;
                let shown = if last_source.is_empty() { NO_CODE } else { last_source.as_str() };
                let req = forge.render_syntax_fix_prompt(SourceLanguage::Verilog, shown, &diags, llm.params)?;
                let text = s.ask(EventKind::VerilogSyntaxFix, req)?;
                design = verilog_of(&text);
                if let Ok(src) = &design {
                    last_source = src.clone();
                }
                continue;
            }
            TestRun::Completed { report, .. } if report.verdict == Verdict::Pass => {
                s.outcome("testbench passes");
                return Ok(finish(s, Stage2Status::Pass, last_source, iters, Vec::new()));
            }
            TestRun::Completed { report, .. } if report.verdict == Verdict::Fail => {
                s.outcome(format!("{} mismatches", report.discrepancies.len()));
                (report.discrepancies, None, false)
            }
            TestRun::Completed { report, .. } => {
                let why = report.problem.unwrap_or_else(|| "unreadable output".into());
                s.outcome(format!("simulation output unusable: {why}"));
                let note = format!(
                    "The testbench could not judge the design because its output was incomplete or inconsistent ({why}). Make sure the module elaborates, drives every output, and lets the simulation reach its end."
                );
                (report.discrepancies, Some(note), true)
            }
            TestRun::Timeout { elapsed } => {
                s.outcome(format!("simulation did not terminate within {:.1} s", elapsed.as_secs_f64()));
                let note = format!(
                    "The simulation did not terminate within {:.0} s. Look for combinational loops, zero-delay feedback, or loops without timing control.",
                    budget.sim_timeout.as_secs_f64()
                );
                (Vec::new(), Some(note), true)
            }
        };
        if iters.function >= budget.max_function_iters {
            let status = if timed_out_or_malformed {
                Stage2Status::BudgetExhausted
            } else {
                Stage2Status::FailFunction
            };
            return Ok(finish(s, status, last_source, iters, discrepancies));
        }
        iters.function += 1;
        syntax_this = 0;
        let req = forge.render_function_fix_prompt(
            spec,
            &last_source,
            &discrepancies,
            stimulus,
            note.as_deref(),
            budget.max_reported_discrepancies,
            llm.params,
        )?;
        let text = s.ask(EventKind::FunctionFix, req)?;
        design = verilog_of(&text);
        if let Ok(src) = &design {
            last_source = src.clone();
        }
    }
}

fn finish(s: Session<'_>, status: Stage2Status, source: String, iterations: Stage2Iterations, ds: Vec<Discrepancy>) -> Stage2Result {
    debug!(status = status.as_str(), ?iterations, "stage 2 done");
    Stage2Result {
        status,
        verilog_source: source,
        iterations,
        final_discrepancies: ds,
        log: s.log,
    }
}
