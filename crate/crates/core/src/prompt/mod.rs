// SPDX-License-Identifier: Apache-2.0
//! Rendering of every prompt the two stages send.

mod template;

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{ChatRequest, ModelParams};
use crate::model::{CoverageReport, DesignKind, Diagnostic, Direction, Discrepancy, PortRole, ProblemSpec, SimTrace, StimulusVector};

pub use template::{placeholders, render, PromptKind, PromptTemplate, TemplateSet};
use template::Fragment;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("missing value for template field `{0}`")]
    MissingField(String),
    #[error("template {template} uses unknown placeholder `{name}`")]
    UnknownPlaceholder { template: String, name: String },
    #[error("malformed placeholder near `{0}`")]
    Malformed(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("reading template {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceLanguage {
    Python,
    Verilog,
}

/// Renders prompts from one template set. Cheap to share across threads.
#[derive(Debug, Clone, Default)]
pub struct PromptForge {
    templates: TemplateSet,
}

/// Prefixes each line with its 1-based number, e.g. `   7 | x = 1`.
pub fn number_lines(source: &str) -> String {
    let mut out = String::new();
    for (i, line) in source.lines().enumerate() {
        let _ = writeln!(out, "{:>4} | {line}", i + 1);
    }
    out.trim_end_matches('\n').to_string()
}

/// `60.0` renders as `60`, `84.94` as `84.9`.
fn percent(x: f64) -> String {
    let s = format!("{:.1}", x);
    s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
}

fn quoted_list<'a>(names: impl Iterator<Item = &'a str>) -> String {
    names.map(|n| format!("`{n}`")).collect::<Vec<_>>().join(", ")
}

fn input_names(spec: &ProblemSpec) -> String {
    let names = quoted_list(spec.inputs().map(|p| p.name.as_str()));
    if names.is_empty() {
        "there are none, so each cycle is an empty object {}".to_string()
    } else {
        names
    }
}

/// Test vectors as a JSON array with one cycle per line.
pub fn vectors_json(vectors: &[StimulusVector]) -> String {
    if vectors.is_empty() {
        return "[]".into();
    }
    let rows: Vec<String> = vectors
        .iter()
        .map(|v| {
            let obj: serde_json::Map<String, serde_json::Value> =
                v.iter().map(|(k, b)| (k.clone(), b.value().into())).collect();
            format!("  {}", serde_json::Value::Object(obj))
        })
        .collect();
    format!("[\n{}\n]", rows.join(",\n"))
}

fn port_table(spec: &ProblemSpec) -> String {
    spec.ports
        .iter()
        .map(|p| {
            let dir = match p.direction {
                Direction::Input => "input",
                Direction::Output => "output",
            };
            let bits = if p.width == 1 { "1 bit".to_string() } else { format!("{} bits", p.width) };
            let role = match p.role {
                PortRole::Data => "data",
                PortRole::Clock => "clock (rising edge)",
                PortRole::Reset => "synchronous active-high reset",
            };
            format!("- `{}`: {dir}, {bits}, {role}", p.name)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// The module header the generated design must reproduce.
pub fn module_header(spec: &ProblemSpec) -> String {
    let ports: Vec<String> = spec.ports.iter().map(|p| format!("    {}", p.verilog_decl())).collect();
    format!("module {} (\n{}\n);", spec.module_name, ports.join(",\n"))
}

impl PromptForge {
    pub fn new(templates: TemplateSet) -> Self {
        Self { templates }
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    fn request(&self, kind: PromptKind, bindings: &[(&str, String)], params: &ModelParams) -> Result<ChatRequest, PromptError> {
        let t = self.templates.template(kind);
        let user = render(&t.user_template, bindings)?;
        Ok(params.request(&t.system_text, user.trim_end().to_string()))
    }

    fn clocking(&self, spec: &ProblemSpec) -> Result<String, PromptError> {
        match (spec.kind, spec.clock()) {
            (DesignKind::Sequential, Some(clk)) => {
                let reset_clause = match spec.reset() {
                    Some(rst) => format!(
                        "`{}` is a synchronous, active-high reset: when it is 1 at a rising edge of `{}`, every register returns to its reset value.",
                        rst.name, clk.name
                    ),
                    None => "There is no reset input; give every register an explicit initial value.".to_string(),
                };
                render(
                    self.templates.fragment(Fragment::ClockingSequential),
                    &[("clock", clk.name.clone()), ("reset_clause", reset_clause)],
                )
            }
            (DesignKind::Sequential, None) => Err(PromptError::Precondition("sequential design without a clock port".into())),
            (DesignKind::Combinational, _) => render(self.templates.fragment(Fragment::ClockingCombinational), &[]),
        }
    }

    fn model_contract(&self, spec: &ProblemSpec) -> Result<String, PromptError> {
        let output_names = quoted_list(spec.outputs().map(|p| p.name.as_str()));
        match spec.kind {
            DesignKind::Sequential => {
                let reset_note = match spec.reset() {
                    Some(rst) => format!(
                        "the same state the synchronous reset `{}` forces; reset and clock are never passed to step",
                        rst.name
                    ),
                    None => "the power-on state; the clock is never passed to step".to_string(),
                };
                render(
                    self.templates.fragment(Fragment::ContractSequential),
                    &[("reset_note", reset_note), ("output_names", output_names)],
                )
            }
            DesignKind::Combinational => render(
                self.templates.fragment(Fragment::ContractCombinational),
                &[("output_names", output_names)],
            ),
        }
    }

    pub fn render_ref_model_prompt(&self, spec: &ProblemSpec, params: &ModelParams) -> Result<ChatRequest, PromptError> {
        let kind = match spec.kind {
            DesignKind::Sequential => "sequential",
            DesignKind::Combinational => "combinational",
        };
        self.request(
            PromptKind::RefModelGen,
            &[
                ("description", spec.description.trim().to_string()),
                ("module_name", spec.module_name.clone()),
                ("kind", kind.to_string()),
                ("port_table", port_table(spec)),
                ("model_contract", self.model_contract(spec)?),
                ("input_names", input_names(spec)),
            ],
            params,
        )
    }

    /// Fails with a precondition error when coverage already meets `threshold`.
    pub fn render_coverage_refine_prompt(
        &self,
        spec: &ProblemSpec,
        model_source: &str,
        current_tests: &[StimulusVector],
        report: &CoverageReport,
        threshold: f64,
        params: &ModelParams,
    ) -> Result<ChatRequest, PromptError> {
        if report.ratio >= threshold {
            return Err(PromptError::Precondition(format!(
                "coverage {} already meets threshold {}",
                report.ratio, threshold
            )));
        }
        let lines = if report.uncovered_lines.is_empty() {
            "none".to_string()
        } else {
            report.uncovered_lines.iter().map(u32::to_string).collect::<Vec<_>>().join(", ")
        };
        self.request(
            PromptKind::CoverageRefine,
            &[
                ("coverage_percent", percent(report.percent())),
                ("threshold_percent", percent(threshold * 100.0)),
                ("uncovered_line_count", report.uncovered_lines.len().to_string()),
                ("uncovered_lines", lines),
                ("uncovered_branch_count", report.uncovered_branch_count.to_string()),
                ("model_source", number_lines(model_source)),
                ("current_tests", vectors_json(current_tests)),
                ("input_names", input_names(spec)),
            ],
            params,
        )
    }

    pub fn render_verilog_gen_prompt(&self, spec: &ProblemSpec, params: &ModelParams) -> Result<ChatRequest, PromptError> {
        self.request(
            PromptKind::VerilogGen,
            &[
                ("description", spec.description.trim().to_string()),
                ("module_name", spec.module_name.clone()),
                ("module_header", module_header(spec)),
                ("clocking", self.clocking(spec)?),
            ],
            params,
        )
    }

    /// Needs at least one error-severity diagnostic.
    pub fn render_syntax_fix_prompt(
        &self,
        language: SourceLanguage,
        source: &str,
        diagnostics: &[Diagnostic],
        params: &ModelParams,
    ) -> Result<ChatRequest, PromptError> {
        if !diagnostics.iter().any(Diagnostic::is_error) {
            return Err(PromptError::Precondition("no error diagnostics to report".into()));
        }
        let mut text = String::new();
        for d in diagnostics {
            let sev = if d.is_error() { "error" } else { "warning" };
            match d.line {
                Some(line) => {
                    let _ = writeln!(text, "- {sev} at line {line}: {}", d.message);
                }
                None => {
                    let _ = writeln!(text, "- {sev}: {}", d.message);
                }
            }
        }
        text.push_str("\nFull tool output:\n```\n");
        for d in diagnostics {
            text.push_str(d.raw.trim_end());
            text.push('\n');
        }
        text.push_str("```");
        let kind = match language {
            SourceLanguage::Python => PromptKind::SyntaxFixPython,
            SourceLanguage::Verilog => PromptKind::SyntaxFixVerilog,
        };
        self.request(kind, &[("source", number_lines(source)), ("diagnostics", text)], params)
    }

    /// Lists the first `cap` mismatches with the inputs applied at each
    /// cycle. `note` explains a failure that produced no mismatch list, such
    /// as a simulation timeout; at least one of the two must be present.
    #[allow(clippy::too_many_arguments)]
    pub fn render_function_fix_prompt(
        &self,
        spec: &ProblemSpec,
        verilog_source: &str,
        discrepancies: &[Discrepancy],
        stimulus: &SimTrace,
        note: Option<&str>,
        cap: usize,
        params: &ModelParams,
    ) -> Result<ChatRequest, PromptError> {
        if discrepancies.is_empty() && note.is_none() {
            return Err(PromptError::Precondition("no discrepancies to report".into()));
        }
        let mut fb = String::new();
        if !discrepancies.is_empty() {
            let shown = discrepancies.len().min(cap.max(1));
            let _ = write!(fb, "Simulation found {} output mismatches", discrepancies.len());
            if shown < discrepancies.len() {
                let _ = writeln!(fb, "; the first {shown} are listed.");
            } else {
                fb.push_str(".\n");
            }
            fb.push_str(match spec.kind {
                DesignKind::Sequential => {
                    "Cycle 0 is the first clock cycle after reset is released. Inputs are applied after the falling clock edge and outputs are sampled just before the next rising edge.\n"
                }
                DesignKind::Combinational => "Each cycle applies one input vector.\n",
            });
            for d in &discrepancies[..shown] {
                let inputs = stimulus
                    .cycles
                    .get(d.cycle as usize)
                    .map(|c| {
                        let parts: Vec<String> = c.inputs.iter().map(|(n, v)| format!("{n}={}", v.value())).collect();
                        if parts.is_empty() { "(no data inputs)".to_string() } else { parts.join(", ") }
                    })
                    .unwrap_or_else(|| "(not recorded)".to_string());
                let _ = write!(
                    fb,
                    "\nMismatch at cycle {}:\n  inputs: {inputs}\n  output `{}`: expected {}, observed {}\n",
                    d.cycle,
                    d.signal,
                    d.expected.value(),
                    d.observed.to_human()
                );
            }
        }
        if let Some(note) = note {
            if !fb.is_empty() {
                fb.push('\n');
            }
            fb.push_str(note.trim());
        }
        self.request(
            PromptKind::FunctionFix,
            &[
                ("feedback", fb.trim_end().to_string()),
                ("source", number_lines(verilog_source)),
                ("clocking", self.clocking(spec)?),
                ("module_name", spec.module_name.clone()),
            ],
            params,
        )
    }
}
