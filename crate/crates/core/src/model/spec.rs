// SPDX-License-Identifier: Apache-2.0
//! Hardware-design problems and their declared interfaces.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bitvec::MAX_WIDTH;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortRole {
    Data,
    Clock,
    Reset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignKind {
    Combinational,
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortDecl {
    pub name: String,
    pub direction: Direction,
    pub width: u32,
    pub role: PortRole,
}

impl PortDecl {
    pub fn data_in(name: &str, width: u32) -> Self {
        Self {
            name: name.to_string(),
            direction: Direction::Input,
            width,
            role: PortRole::Data,
        }
    }

    pub fn data_out(name: &str, width: u32) -> Self {
        Self {
            name: name.to_string(),
            direction: Direction::Output,
            width,
            role: PortRole::Data,
        }
    }

    pub fn clock(name: &str) -> Self {
        Self {
            name: name.to_string(),
            direction: Direction::Input,
            width: 1,
            role: PortRole::Clock,
        }
    }

    pub fn reset(name: &str) -> Self {
        Self {
            name: name.to_string(),
            direction: Direction::Input,
            width: 1,
            role: PortRole::Reset,
        }
    }

    /// Verilog port declaration, e.g. `input [3:0] a`.
    pub fn verilog_decl(&self) -> String {
        let dir = match self.direction {
            Direction::Input => "input",
            Direction::Output => "output",
        };
        if self.width == 1 {
            format!("{dir} {}", self.name)
        } else {
            format!("{dir} [{}:0] {}", self.width - 1, self.name)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub id: String,
    pub description: String,
    pub module_name: String,
    pub ports: Vec<PortDecl>,
    pub kind: DesignKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub golden_testbench: Option<String>,
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("problem `{id}`: field `{field}`: {reason}")]
    Invalid {
        id: String,
        field: String,
        reason: String,
    },
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("duplicate problem id `{0}`")]
    DuplicateId(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

const VERILOG_KEYWORDS: &[&str] = &[
    "always", "assign", "begin", "case", "default", "else", "end", "endcase", "endmodule",
    "for", "if", "initial", "inout", "input", "integer", "module", "negedge", "output",
    "posedge", "reg", "wire", "logic",
];

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl ProblemSpec {
    fn invalid(&self, field: &str, reason: impl Into<String>) -> SpecError {
        SpecError::Invalid {
            id: self.id.clone(),
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.id.trim().is_empty() {
            return Err(self.invalid("id", "must be nonempty"));
        }
        if self.description.trim().is_empty() {
            return Err(self.invalid("description", "must be nonempty"));
        }
        if !is_identifier(&self.module_name) {
            return Err(self.invalid("module_name", "not a Verilog identifier"));
        }
        let mut seen = HashSet::new();
        for p in &self.ports {
            let field = format!("ports[{}]", p.name);
            if !is_identifier(&p.name) || VERILOG_KEYWORDS.contains(&p.name.as_str()) {
                return Err(self.invalid(&field, "not a usable Verilog identifier"));
            }
            if p.name.starts_with("tb_") {
                return Err(self.invalid(&field, "the `tb_` prefix is reserved for testbench names"));
            }
            if !seen.insert(p.name.as_str()) {
                return Err(self.invalid(&field, "duplicate port name"));
            }
            if p.width == 0 || p.width > MAX_WIDTH {
                return Err(self.invalid(&field, format!("width must be in 1..={MAX_WIDTH}")));
            }
            if p.role != PortRole::Data && (p.direction != Direction::Input || p.width != 1) {
                return Err(self.invalid(&field, "clock/reset ports must be 1-bit inputs"));
            }
        }
        let clocks = self.ports.iter().filter(|p| p.role == PortRole::Clock).count();
        let resets = self.ports.iter().filter(|p| p.role == PortRole::Reset).count();
        match self.kind {
            DesignKind::Combinational if clocks + resets > 0 => {
                return Err(self.invalid("kind", "combinational designs take no clock or reset"));
            }
            DesignKind::Sequential if clocks != 1 => {
                return Err(self.invalid("ports", "sequential designs need exactly one clock"));
            }
            DesignKind::Sequential if resets > 1 => {
                return Err(self.invalid("ports", "at most one reset port"));
            }
            _ => {}
        }
        if self.outputs().next().is_none() {
            return Err(self.invalid("ports", "at least one output is required"));
        }
        Ok(())
    }

    /// Data inputs, in declaration order.
    pub fn inputs(&self) -> impl Iterator<Item = &PortDecl> {
        self.ports
            .iter()
            .filter(|p| p.direction == Direction::Input && p.role == PortRole::Data)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &PortDecl> {
        self.ports.iter().filter(|p| p.direction == Direction::Output)
    }

    pub fn clock(&self) -> Option<&PortDecl> {
        self.ports.iter().find(|p| p.role == PortRole::Clock)
    }

    pub fn reset(&self) -> Option<&PortDecl> {
        self.ports.iter().find(|p| p.role == PortRole::Reset)
    }

    pub fn port(&self, name: &str) -> Option<&PortDecl> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn output_width(&self, name: &str) -> Option<u32> {
        self.outputs().find(|p| p.name == name).map(|p| p.width)
    }

    /// Widths of every data port, keyed by name.
    pub fn data_port_widths(&self) -> BTreeMap<String, u32> {
        self.ports
            .iter()
            .filter(|p| p.role == PortRole::Data)
            .map(|p| (p.name.clone(), p.width))
            .collect()
    }
}

#[derive(Deserialize)]
struct ProblemLine {
    #[serde(flatten)]
    spec: ProblemSpec,
    /// Golden testbench on disk, relative to the problem file.
    #[serde(default)]
    golden_testbench_path: Option<String>,
}

/// Parses line-delimited JSON problems; blank lines are skipped.
pub fn parse_problems(text: &str, base_dir: Option<&Path>) -> Result<Vec<ProblemSpec>, SpecError> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ProblemLine =
            serde_json::from_str(line).map_err(|source| SpecError::Json { line: i + 1, source })?;
        let mut spec = parsed.spec;
        if let (None, Some(rel)) = (&spec.golden_testbench, parsed.golden_testbench_path) {
            let path = base_dir.map(|d| d.join(&rel)).unwrap_or_else(|| rel.clone().into());
            let text = fs::read_to_string(&path).map_err(|source| SpecError::Io {
                path: path.display().to_string(),
                source,
            })?;
            spec.golden_testbench = Some(text);
        }
        spec.validate()?;
        if !ids.insert(spec.id.clone()) {
            return Err(SpecError::DuplicateId(spec.id));
        }
        out.push(spec);
    }
    Ok(out)
}

pub fn load_problems(path: &Path) -> Result<Vec<ProblemSpec>, SpecError> {
    let text = fs::read_to_string(path).map_err(|source| SpecError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_problems(&text, path.parent())
}
