// SPDX-License-Identifier: Apache-2.0
//! Reference model generation and coverage-driven test refinement.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use tracing::{debug, info};

use super::{Llm, Session, StageError, NO_CODE};
use crate::harness::{parse_vectors, HarnessJob, HarnessStatus, ModelHarness};
use crate::llm::{extract_code_block, CodeTag};
use crate::model::{CoverageReport, Diagnostic, EventKind, IterationLog, ProblemSpec, RunBudget, SimTrace, Stage, StimulusVector};
use crate::prompt::SourceLanguage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage1Status {
    Ok,
    FailReference,
    BudgetExhaustedCoverage,
}

impl Stage1Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage1Status::Ok => "ok",
            Stage1Status::FailReference => "fail_reference",
            Stage1Status::BudgetExhaustedCoverage => "budget_exhausted_coverage",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage1Iterations {
    pub syntax: u32,
    pub coverage: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Stage1Options {
    /// Send coverage feedback prompts. Off reproduces the no-feedback
    /// ablation: the initial vectors are used as they are.
    pub coverage_feedback: bool,
    #[serde(with = "crate::model::secs")]
    pub model_time_limit: Duration,
}

impl Default for Stage1Options {
    fn default() -> Self {
        Self {
            coverage_feedback: true,
            model_time_limit: Duration::from_secs(10),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Result {
    pub status: Stage1Status,
    pub model_source: String,
    pub test_vectors: Vec<StimulusVector>,
    /// Trace of `model_source` over `test_vectors`; empty on failure.
    pub trace: SimTrace,
    pub coverage: Option<CoverageReport>,
    pub iterations: Stage1Iterations,
    /// Why the reference model was given up on.
    pub failure: Option<String>,
    pub log: IterationLog,
}

/// What one response yielded.
struct Candidate {
    model: Option<String>,
    vectors: Result<Vec<StimulusVector>, String>,
}

impl Candidate {
    /// Reads a model block and, when present, a vector block. A response
    /// without vectors keeps `previous` (a repair usually only touches the
    /// model).
    fn from_response(text: &str, spec: &ProblemSpec, previous: Option<&Result<Vec<StimulusVector>, String>>) -> Self {
        let model = extract_code_block(text, CodeTag::Python).ok();
        let vectors = match extract_json(text) {
            Some(block) => parse_vectors(&block, spec).map_err(|e| e.to_string()),
            None => match previous {
                Some(prev) => prev.clone(),
                None => Err("the response contained no ```json block of test inputs".into()),
            },
        };
        Self { model, vectors }
    }
}

/// Only an explicitly tagged block counts; an untagged fence is more
/// likely the model.
fn extract_json(text: &str) -> Option<String> {
    let python = extract_code_block(text, CodeTag::Python).ok();
    extract_code_block(text, CodeTag::Json).ok().filter(|b| Some(b) != python.as_ref())
}

struct Run {
    vectors: Vec<StimulusVector>,
    trace: SimTrace,
    coverage: CoverageReport,
}

enum Attempt {
    Ran(Run),
    Failed(Diagnostic),
}

fn attempt(
    spec: &ProblemSpec,
    harness: &dyn ModelHarness,
    model: &str,
    vectors: &[StimulusVector],
    limit: Duration,
) -> Result<Attempt, StageError> {
    let job = HarnessJob::new(spec, model, vectors, limit);
    let result = harness.execute(&job)?;
    match result.into_trace(spec, &job) {
        Ok((trace, coverage)) => Ok(Attempt::Ran(Run {
            vectors: vectors.to_vec(),
            trace,
            coverage,
        })),
        Err(bad) => {
            let text = match bad.status {
                HarnessStatus::SyntaxError | HarnessStatus::RuntimeError => bad.error_text,
                HarnessStatus::Timeout => format!("Timeout: {}", bad.error_text),
                HarnessStatus::ContractViolation => format!("ContractViolation: {}", bad.error_text),
                HarnessStatus::Ok => unreachable!("into_trace accepts ok results"),
            };
            Ok(Attempt::Failed(Diagnostic::from_python_error(&text)))
        }
    }
}

/// Generates the reference model, repairs it until it runs, then refines
/// the test vectors until line coverage reaches the threshold.
pub fn run_stage1(
    spec: &ProblemSpec,
    llm: Llm<'_>,
    harness: &dyn ModelHarness,
    budget: &RunBudget,
    opts: &Stage1Options,
) -> Result<Stage1Result, StageError> {
    let mut s = Session::new(llm, Stage::Stage1);
    let forge = llm.forge;
    let mut iters = Stage1Iterations::default();

    let text = s.ask(EventKind::RefModelGen, forge.render_ref_model_prompt(spec, llm.params)?)?;
    let mut cand = Candidate::from_response(&text, spec, None);
    let (model, mut best) = loop {
        let problem = match (&cand.model, &cand.vectors) {
            (None, _) => Diagnostic::error("the response contained no ```python block with the model"),
            (Some(_), Err(e)) => Diagnostic::error(format!("test input sequence rejected: {e}")),
            (Some(m), Ok(v)) => match attempt(spec, harness, m, v, opts.model_time_limit)? {
                Attempt::Ran(run) => break (m.clone(), run),
                Attempt::Failed(d) => d,
            },
        };
        s.outcome(format!("rejected: {}", problem.message));
        if iters.syntax >= budget.max_python_syntax_iters {
            info!(problem = %spec.id, "reference model repair budget exhausted");
            return Ok(Stage1Result {
                status: Stage1Status::FailReference,
                model_source: cand.model.unwrap_or_default(),
                test_vectors: cand.vectors.unwrap_or_default(),
                trace: SimTrace::default(),
                coverage: None,
                iterations: iters,
                failure: Some(problem.raw),
                log: s.log,
            });
        }
        iters.syntax += 1;
        let source = cand.model.as_deref().unwrap_or(NO_CODE);
        let req = forge.render_syntax_fix_prompt(SourceLanguage::Python, source, &[problem], llm.params)?;
        let text = s.ask(EventKind::PythonSyntaxFix, req)?;
        let next = Candidate::from_response(&text, spec, Some(&cand.vectors));
        cand = Candidate {
            model: next.model.or(cand.model),
            vectors: next.vectors,
        };
    };
    s.outcome(format!("model runs; line coverage {:.1}%", best.coverage.percent()));

    let threshold = budget.coverage_threshold;
    while opts.coverage_feedback && best.coverage.ratio < threshold && iters.coverage < budget.max_coverage_iters {
        iters.coverage += 1;
        let req = forge.render_coverage_refine_prompt(spec, &model, &best.vectors, &best.coverage, threshold, llm.params)?;
        let text = s.ask(EventKind::CoverageRefine, req)?;
        let vectors = match extract_code_block(&text, CodeTag::Json) {
            Ok(block) => parse_vectors(&block, spec).map_err(|e| e.to_string()),
            Err(e) => Err(e.to_string()),
        };
        let vectors = match vectors {
            Ok(v) => v,
            Err(e) => {
                s.outcome(format!("unusable test inputs: {e}"));
                continue;
            }
        };
        match attempt(spec, harness, &model, &vectors, opts.model_time_limit)? {
            Attempt::Ran(run) => {
                let pct = run.coverage.percent();
                // strict: an equal-coverage attempt does not displace the incumbent
                if run.coverage.ratio > best.coverage.ratio {
                    s.outcome(format!("line coverage {pct:.1}%, kept"));
                    best = run;
                } else {
                    s.outcome(format!("line coverage {pct:.1}%, not better than {:.1}%", best.coverage.percent()));
                }
            }
            Attempt::Failed(d) => s.outcome(format!("refined inputs failed on the model: {}", d.message)),
        }
    }
    let status = if best.coverage.ratio >= threshold {
        Stage1Status::Ok
    } else {
        Stage1Status::BudgetExhaustedCoverage
    };
    debug!(problem = %spec.id, status = status.as_str(), coverage = best.coverage.ratio, "stage 1 done");
    Ok(Stage1Result {
        status,
        model_source: model,
        test_vectors: best.vectors,
        trace: best.trace,
        coverage: Some(best.coverage),
        iterations: iters,
        failure: None,
        log: s.log,
    })
}
