// SPDX-License-Identifier: Apache-2.0

use super::{run_stage1, run_stage2, Llm, Stage1Options, Stage1Result, Stage1Status, Stage2Status, StageError};
use crate::harness::ModelHarness;
use crate::model::{PipelineOutcome, PipelineStatus, ProblemSpec, RunBudget};
use crate::testbench::{synthesize_testbench, TestbenchOptions};
use crate::toolchain::HdlRunner;

/// Everything one end-to-end run needs.
#[derive(Clone, Copy)]
pub struct Pipeline<'a> {
    pub stage1: Llm<'a>,
    pub stage2: Llm<'a>,
    pub harness: &'a dyn ModelHarness,
    pub runner: &'a dyn HdlRunner,
    pub budget: &'a RunBudget,
    pub stage1_options: &'a Stage1Options,
    pub testbench_options: &'a TestbenchOptions,
}

impl Pipeline<'_> {
    pub fn run_stage1(&self, spec: &ProblemSpec) -> Result<Stage1Result, StageError> {
        run_stage1(spec, self.stage1, self.harness, self.budget, self.stage1_options)
    }

    /// Runs stage 2 as sample `sample` on top of a finished stage 1.
    pub fn complete(&self, spec: &ProblemSpec, s1: &Stage1Result, sample: u32) -> Result<PipelineOutcome, StageError> {
        let mut outcome = PipelineOutcome {
            problem_id: spec.id.clone(),
            status: PipelineStatus::FailReference,
            stage1_status: s1.status.as_str().to_string(),
            reference_source: s1.model_source.clone(),
            test_vectors: s1.test_vectors.clone(),
            reference_trace: s1.trace.clone(),
            testbench_source: String::new(),
            verilog_source: String::new(),
            coverage: s1.coverage.clone(),
            final_discrepancies: Vec::new(),
            iteration_log: s1.log.clone(),
        };
        if s1.status == Stage1Status::FailReference {
            return Ok(outcome);
        }
        let tb = synthesize_testbench(spec, &s1.trace, self.testbench_options)?;
        let llm = Llm {
            variant: sample,
            ..self.stage2
        };
        let s2 = run_stage2(spec, &tb, &s1.trace, llm, self.runner, self.budget)?;
        outcome.status = match s2.status {
            Stage2Status::Pass => PipelineStatus::Pass,
            Stage2Status::FailSyntax => PipelineStatus::FailSyntax,
            Stage2Status::FailFunction => PipelineStatus::FailFunction,
            Stage2Status::BudgetExhausted => PipelineStatus::BudgetExhausted,
        };
        outcome.testbench_source = tb.source;
        outcome.verilog_source = s2.verilog_source;
        outcome.final_discrepancies = s2.final_discrepancies;
        outcome.iteration_log.extend(s2.log);
        Ok(outcome)
    }
}

/// Stage 1, testbench synthesis, and stage 2 for one problem.
pub fn run_pipeline(spec: &ProblemSpec, pipeline: &Pipeline<'_>) -> Result<PipelineOutcome, StageError> {
    let s1 = pipeline.run_stage1(spec)?;
    pipeline.complete(spec, &s1, 0)
}
