// SPDX-License-Identifier: Apache-2.0
#![allow(dead_code)]

pub mod corpus;
pub mod mismatch;

use autoverifix::model::{BitVec, CycleRecord, DesignKind, Logic, PortDecl, ProblemSpec, SimTrace};
use autoverifix::toolchain::{Toolchain, ToolchainConfig};

/// Two-state detector of two consecutive ones.
pub fn fsm_spec() -> ProblemSpec {
    ProblemSpec {
        id: "seq_detect_11".into(),
        description: "A Mealy state machine with two states, IDLE and SEEN1, that reads input x \
            on every rising clock edge. It moves to SEEN1 when x is 1 and to IDLE when x is 0. \
            Output z is 1 exactly when the machine is in SEEN1 and x is 1. Reset enters IDLE."
            .into(),
        module_name: "seq_detect".into(),
        ports: vec![
            PortDecl::clock("clk"),
            PortDecl::reset("rst"),
            PortDecl::data_in("x", 1),
            PortDecl::data_out("z", 1),
        ],
        kind: DesignKind::Sequential,
        golden_testbench: None,
    }
}

pub fn adder_spec() -> ProblemSpec {
    ProblemSpec {
        id: "adder4".into(),
        description: "A 4-bit adder: sum is (a + b) modulo 16 and cout is the carry out.".into(),
        module_name: "adder4".into(),
        ports: vec![
            PortDecl::data_in("a", 4),
            PortDecl::data_in("b", 4),
            PortDecl::data_out("sum", 4),
            PortDecl::data_out("cout", 1),
        ],
        kind: DesignKind::Combinational,
        golden_testbench: None,
    }
}

pub fn counter_spec() -> ProblemSpec {
    ProblemSpec {
        id: "counter3".into(),
        description: "A 3-bit up counter with enable. When en is 1 the count increments \
            by one on each rising clock edge, wrapping from 7 to 0. Reset sets the count to 0."
            .into(),
        module_name: "counter3".into(),
        ports: vec![
            PortDecl::clock("clk"),
            PortDecl::reset("rst"),
            PortDecl::data_in("en", 1),
            PortDecl::data_out("count", 3),
        ],
        kind: DesignKind::Sequential,
        golden_testbench: None,
    }
}

pub const FSM_GOOD: &str = "module seq_detect(input clk, input rst, input x, output z);
  reg s;
  always @(posedge clk) if (rst) s <= 1'b0; else s <= x;
  assign z = s & x;
endmodule
";

pub const ADDER_GOOD: &str = "module adder4(input [3:0] a, input [3:0] b, output [3:0] sum, output cout);
  assign {cout, sum} = a + b;
endmodule
";

pub const COUNTER_GOOD: &str = "module counter3(input clk, input rst, input en, output reg [2:0] count);
  always @(posedge clk) if (rst) count <= 3'd0; else if (en) count <= count + 3'd1;
endmodule
";

fn bv(w: u32, v: u64) -> BitVec {
    BitVec::new(w, v).unwrap()
}

fn record(i: usize, inputs: &[(&str, u32, u64)], outputs: &[(&str, u32, u64)]) -> CycleRecord {
    CycleRecord {
        cycle_index: i as u64,
        inputs: inputs.iter().map(|(n, w, v)| (n.to_string(), bv(*w, *v))).collect(),
        outputs: outputs.iter().map(|(n, w, v)| (n.to_string(), Logic::Known(bv(*w, *v)))).collect(),
        state: None,
    }
}

/// Reference behaviour of `fsm_spec`: outputs from the current state, then
/// the state advances.
pub fn fsm_trace(xs: &[u64]) -> SimTrace {
    let mut seen = 0;
    SimTrace::new(
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let r = record(i, &[("x", 1, x)], &[("z", 1, seen & x)]);
                seen = x;
                r
            })
            .collect(),
    )
}

pub fn adder_trace(pairs: &[(u64, u64)]) -> SimTrace {
    SimTrace::new(
        pairs
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| record(i, &[("a", 4, a), ("b", 4, b)], &[("sum", 4, (a + b) & 15), ("cout", 1, (a + b) >> 4)]))
            .collect(),
    )
}

pub fn counter_trace(en: &[u64]) -> SimTrace {
    let mut n = 0;
    SimTrace::new(
        en.iter()
            .enumerate()
            .map(|(i, &e)| {
                let r = record(i, &[("en", 1, e)], &[("count", 3, n)]);
                n = (n + e) % 8;
                r
            })
            .collect(),
    )
}

/// The installed simulator, or `None` after printing a SKIP note.
pub fn toolchain(test: &str) -> Option<Toolchain> {
    match ToolchainConfig::detect() {
        Some(c) => Some(Toolchain::new(c)),
        None => {
            eprintln!("SKIP {test}: no Verilog toolchain on PATH");
            None
        }
    }
}

// ---- scripted collaborators for controller tests ----

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use autoverifix::harness::{HarnessError, HarnessJob, HarnessResult, HarnessStatus, ModelHarness, WireCycle};
use autoverifix::llm::{ChatBackend, Gateway, ModelParams, RetryPolicy, ScriptedBackend};
use autoverifix::model::{CoverageReport, Diagnostic, Discrepancy};
use autoverifix::pipeline::Llm;
use autoverifix::prompt::{PromptForge, TemplateSet};
use autoverifix::toolchain::{compose_sim_output, parse_sim_output, HdlRunner, TestRun, ToolchainError};

type JobFn = dyn Fn(&HarnessJob) -> HarnessResult + Send + Sync;

/// Executor double that answers each job with `f` and remembers the jobs.
pub struct FnHarness {
    f: Box<JobFn>,
    jobs: Mutex<Vec<HarnessJob>>,
}

impl FnHarness {
    pub fn new(f: impl Fn(&HarnessJob) -> HarnessResult + Send + Sync + 'static) -> Self {
        Self {
            f: Box::new(f),
            jobs: Mutex::new(Vec::new()),
        }
    }

    pub fn jobs(&self) -> Vec<HarnessJob> {
        self.jobs.lock().unwrap().clone()
    }
}

impl ModelHarness for FnHarness {
    fn execute(&self, job: &HarnessJob) -> Result<HarnessResult, HarnessError> {
        self.jobs.lock().unwrap().push(job.clone());
        Ok((self.f)(job))
    }
}

/// An `ok` result whose outputs come from `step` applied to each vector.
pub fn ok_result(
    job: &HarnessJob,
    coverage: CoverageReport,
    mut step: impl FnMut(&BTreeMap<String, u64>) -> BTreeMap<String, u64>,
) -> HarnessResult {
    HarnessResult {
        status: HarnessStatus::Ok,
        error_text: String::new(),
        trace: job
            .test_vectors
            .iter()
            .enumerate()
            .map(|(i, v)| WireCycle {
                cycle_index: i as u64,
                inputs: v.clone(),
                outputs: step(v),
                state: None,
            })
            .collect(),
        coverage: Some(coverage),
    }
}

/// The two-consecutive-ones detector as the executor would run it.
pub fn fsm_step() -> impl FnMut(&BTreeMap<String, u64>) -> BTreeMap<String, u64> {
    let mut seen = 0;
    move |v| {
        let x = v["x"];
        let z = seen & x;
        seen = x;
        [("z".to_string(), z)].into()
    }
}

type RunFn = dyn Fn(&str, &str, &str) -> TestRun + Send + Sync;

/// Simulator double: `f` judges each design; designs are remembered.
pub struct FnRunner {
    f: Box<RunFn>,
    designs: Mutex<Vec<String>>,
}

impl FnRunner {
    pub fn new(f: impl Fn(&str) -> TestRun + Send + Sync + 'static) -> Self {
        Self::with_testbench(move |design, _, _| f(design))
    }

    /// `f` also sees the testbench text and its top module.
    pub fn with_testbench(f: impl Fn(&str, &str, &str) -> TestRun + Send + Sync + 'static) -> Self {
        Self {
            f: Box::new(f),
            designs: Mutex::new(Vec::new()),
        }
    }

    pub fn designs(&self) -> Vec<String> {
        self.designs.lock().unwrap().clone()
    }
}

impl HdlRunner for FnRunner {
    fn run(&self, _: &ProblemSpec, design: &str, testbench: &str, top: &str, _: Duration) -> Result<TestRun, ToolchainError> {
        self.designs.lock().unwrap().push(design.to_string());
        Ok((self.f)(design, testbench, top))
    }
}

pub fn sim_pass(spec: &ProblemSpec) -> TestRun {
    sim_with(spec, &[])
}

/// What the simulator reports for `ds`, read back through the parser.
pub fn sim_with(spec: &ProblemSpec, ds: &[Discrepancy]) -> TestRun {
    let stdout = compose_sim_output(ds);
    TestRun::Completed {
        report: parse_sim_output(&stdout, spec),
        stdout,
    }
}

pub fn compile_error(line: u32, message: &str) -> TestRun {
    TestRun::CompileError(vec![Diagnostic {
        severity: autoverifix::model::Severity::Error,
        file: Some("dut.v".into()),
        line: Some(line),
        message: message.into(),
        raw: format!("%Error: dut.v:{line}:5: {message}"),
    }])
}

pub fn mismatch(cycle: u64, signal: &str, width: u32, expected: u64, observed: u64) -> Discrepancy {
    Discrepancy {
        cycle,
        signal: signal.into(),
        expected: bv(width, expected),
        observed: Logic::Known(bv(width, observed)),
    }
}

pub fn fenced(tag: &str, body: &str) -> String {
    format!("```{tag}\n{}\n```\n", body.trim_end())
}

/// Gateway, prompts, and decoding settings for one scripted backend.
pub struct Kit {
    pub backend: Arc<ScriptedBackend>,
    pub gateway: Gateway,
    pub forge: PromptForge,
    pub params: ModelParams,
}

impl Kit {
    pub fn new(backend: ScriptedBackend) -> Self {
        let backend = Arc::new(backend);
        Self {
            gateway: Gateway::new(backend.clone() as Arc<dyn ChatBackend>, RetryPolicy::immediate(3), 4),
            backend,
            forge: PromptForge::new(TemplateSet::builtin()),
            params: ModelParams::default(),
        }
    }

    pub fn replies<S: Into<String>>(items: impl IntoIterator<Item = S>) -> Self {
        Self::new(ScriptedBackend::replies(items))
    }

    pub fn llm(&self) -> Llm<'_> {
        Llm {
            gateway: &self.gateway,
            forge: &self.forge,
            params: &self.params,
            variant: 0,
        }
    }

    /// User-message text of every prompt sent, in order.
    pub fn prompts(&self) -> Vec<String> {
        self.backend.calls().iter().map(|r| r.messages.last().unwrap().content.clone()).collect()
    }
}

/// Detector of the pattern 1, 1, 0 (raises z on the closing 0).
pub fn fsm110_spec() -> ProblemSpec {
    ProblemSpec {
        id: "seq_detect_110".into(),
        description: "A Mealy state machine that reads x on every rising clock edge and sets z to 1 \
            on the cycle where x is 0 right after two consecutive ones. Overlapping patterns count. \
            Reset returns to the initial state."
            .into(),
        module_name: "seq_detect_110".into(),
        ports: vec![
            PortDecl::clock("clk"),
            PortDecl::reset("rst"),
            PortDecl::data_in("x", 1),
            PortDecl::data_out("z", 1),
        ],
        kind: DesignKind::Sequential,
        golden_testbench: None,
    }
}

pub fn fixture(path: &str) -> String {
    let p = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(path);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

pub fn fixture_path(path: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(path)
}
