// SPDX-License-Identifier: Apache-2.0
//! Shared data model: problems, bit vectors, traces, feedback records.

mod bitvec;
mod records;
mod spec;
mod trace;

pub use bitvec::{format_bitvec, parse_bitvec, parse_sim_hex, BitVec, BitVecError, Logic, MAX_WIDTH};
pub use records::{
    sha256_hex, BudgetError, CoverageError, CoverageReport, Diagnostic, EventKind, IterationEvent,
    IterationLog, PipelineOutcome, PipelineStatus, RunBudget, Severity, Stage, StimulusVector,
};
pub(crate) use records::secs;
pub use spec::{load_problems, parse_problems, DesignKind, Direction, PortDecl, PortRole, ProblemSpec, SpecError};
pub use trace::{compare_traces, CycleRecord, Discrepancy, SimTrace, TraceError};
