// SPDX-License-Identifier: Apache-2.0
//! The two feedback stages and their assembly into one run.

mod run;
mod stage1;
mod stage2;

use thiserror::Error;

use crate::harness::HarnessError;
use crate::llm::{ChatRequest, Gateway, GatewayError, ModelParams};
use crate::model::{EventKind, IterationEvent, IterationLog, Stage};
use crate::prompt::{PromptError, PromptForge};
use crate::testbench::TestbenchError;
use crate::toolchain::ToolchainError;

pub use run::{run_pipeline, Pipeline};
pub use stage1::{run_stage1, Stage1Iterations, Stage1Options, Stage1Result, Stage1Status};
pub use stage2::{run_stage2, Stage2Iterations, Stage2Result, Stage2Status};

#[derive(Debug, Error)]
pub enum StageError {
    #[error("{stage:?}: model call failed: {source}")]
    Gateway {
        stage: Stage,
        #[source]
        source: GatewayError,
    },
    #[error("prompt rendering: {0}")]
    Prompt(#[from] PromptError),
    #[error("reference model executor: {0}")]
    Harness(#[from] HarnessError),
    #[error("toolchain: {0}")]
    Toolchain(#[from] ToolchainError),
    #[error("testbench: {0}")]
    Testbench(#[from] TestbenchError),
}

/// Shown in place of the source when a reply carried no code at all.
const NO_CODE: &str = "(no code: the previous reply did not contain a code block)";

/// A stage's access to a language model.
#[derive(Clone, Copy)]
pub struct Llm<'a> {
    pub gateway: &'a Gateway,
    pub forge: &'a PromptForge,
    pub params: &'a ModelParams,
    /// Sample slot; keeps independent samples of one prompt apart in
    /// transcripts.
    pub variant: u32,
}

/// Sends prompts for one stage and keeps the audit trail.
struct Session<'a> {
    llm: Llm<'a>,
    stage: Stage,
    log: IterationLog,
}

impl<'a> Session<'a> {
    fn new(llm: Llm<'a>, stage: Stage) -> Self {
        Self {
            llm,
            stage,
            log: IterationLog::default(),
        }
    }

    fn ask(&mut self, kind: EventKind, request: ChatRequest) -> Result<String, StageError> {
        let request = request.with_variant(self.llm.variant);
        let prompt_digest = request.digest();
        let done = self.llm.gateway.complete(&request).map_err(|source| StageError::Gateway {
            stage: self.stage,
            source,
        })?;
        for e in &done.retries {
            self.log.push(IterationEvent {
                stage: self.stage,
                kind: EventKind::Retry,
                prompt_digest: prompt_digest.clone(),
                response_digest: String::new(),
                summary: e.to_string(),
            });
        }
        self.log.push(IterationEvent {
            stage: self.stage,
            kind,
            prompt_digest,
            response_digest: done.response.digest(),
            summary: String::new(),
        });
        Ok(done.response.content)
    }

    /// Records what came of the latest prompt.
    fn outcome(&mut self, summary: impl Into<String>) {
        if let Some(e) = self.log.events.iter_mut().rev().find(|e| e.kind != EventKind::Retry) {
            e.summary = summary.into();
        }
    }
}
