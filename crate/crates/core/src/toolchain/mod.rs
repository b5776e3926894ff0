// SPDX-License-Identifier: Apache-2.0
//! Adapter over an external Verilog compiler and simulator.
//!
//! Both steps are shell command templates. Placeholders `{sources}`,
//! `{artifact}`, `{top}`, `{workdir}` and `{cache}` are replaced by
//! shell-quoted values; the command runs with the private work directory
//! as its current directory.

mod diagnostics;
mod simout;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tempfile::TempDir;
use thiserror::Error;
use tracing::debug;

use crate::exec::{run_shell, ExecOutput};
use crate::model::{Diagnostic, ProblemSpec};
use crate::testbench::TestbenchSource;

pub use diagnostics::parse_diagnostics;
pub use simout::{compose_sim_output, parse_sim_output, SimReport, Verdict};

/// Source file name of the design under test inside a work directory.
pub const DESIGN_FILE: &str = "dut.v";
pub const TESTBENCH_FILE: &str = "tb.v";

const MAX_RAW_DIAGNOSTIC: usize = 4000;

#[derive(Debug, Error)]
pub enum ToolchainError {
    #[error("no sources to compile")]
    NoSources,
    #[error("bad source file name `{0}`")]
    BadSourceName(String),
    #[error("toolchain command not found: {0}")]
    Missing(String),
    #[error("toolchain I/O: {0}")]
    Io(#[from] std::io::Error),
}

fn default_timeout() -> f64 {
    300.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolchainConfig {
    pub compile_cmd: String,
    pub run_cmd: String,
    /// Wall-clock limit for one compile, in seconds. Simulation limits come
    /// from the run budget.
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    /// Shared directory for reusable build products, for toolchains that
    /// have any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    /// Parent of per-call work directories; the system temp dir if unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scratch_dir: Option<PathBuf>,
}

fn on_path(program: &str) -> bool {
    std::env::var_os("PATH")
        .map(|paths| std::env::split_paths(&paths).any(|d| d.join(program).is_file()))
        .unwrap_or(false)
}

impl ToolchainConfig {
    pub fn iverilog() -> Self {
        Self {
            compile_cmd: "iverilog -g2012 -s {top} -o {artifact} {sources}".into(),
            run_cmd: "vvp -n {artifact}".into(),
            timeout_s: default_timeout(),
            cache_dir: None,
            scratch_dir: None,
        }
    }

    /// Verilator in binary mode. The runtime objects shared by every model
    /// are kept in `{cache}` and copied into each build, which cuts a
    /// rebuild from tens of seconds to a few.
    pub fn verilator(program: &str) -> Self {
        let make_flags = "PYTHON3=python3 CFG_CXXFLAGS_STD=-std=c++20 OPT_FAST=-O0 OPT_SLOW=-O0 OPT_GLOBAL=-O0";
        let compile = format!(
            "{program} --cc --exe --main --timing --timescale 1ns/1ps -Wno-fatal -Wno-lint -Wno-style \
             --top-module {{top}} -Mdir obj {{sources}} >/dev/null \
             && mkdir -p {{cache}} \
             && {{ for f in {{cache}}/*.o; do [ -e \"$f\" ] && cp \"$f\" obj/; done; true; }} \
             && make -s -C obj -f V{{top}}.mk {make_flags} >/dev/null \
             && {{ for f in obj/verilated*.o; do b=$(basename \"$f\"); [ -e {{cache}}/\"$b\" ] || {{ cp \"$f\" {{cache}}/\"$b.$$\" && mv {{cache}}/\"$b.$$\" {{cache}}/\"$b\"; }}; done; true; }} \
             && cp obj/V{{top}} {{artifact}}"
        );
        Self {
            compile_cmd: compile,
            run_cmd: "{artifact}".into(),
            timeout_s: default_timeout(),
            cache_dir: Some(std::env::temp_dir().join("autoverifix-verilator-cache")),
            scratch_dir: None,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "iverilog" => Some(Self::iverilog()),
            "verilator" => Some(Self::verilator("verilator")),
            "verilator-cli" => Some(Self::verilator("verilator-cli")),
            _ => None,
        }
    }

    /// First preset whose programs are on `PATH`.
    pub fn detect() -> Option<Self> {
        if on_path("iverilog") && on_path("vvp") {
            return Some(Self::iverilog());
        }
        ["verilator", "verilator-cli"].into_iter().find(|p| on_path(p)).map(Self::verilator)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub name: String,
    pub text: String,
}

impl SourceFile {
    pub fn new(name: &str, text: &str) -> Self {
        Self {
            name: name.into(),
            text: text.into(),
        }
    }
}

/// A simulatable build; its work directory lives as long as it does.
#[derive(Debug)]
pub struct Artifact {
    workdir: TempDir,
    path: PathBuf,
    pub warnings: Vec<Diagnostic>,
}

impl Artifact {
    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn workdir(&self) -> &Path {
        self.workdir.path()
    }
}

#[derive(Debug)]
pub enum Compiled {
    Built(Artifact),
    /// Always holds at least one error.
    Failed(Vec<Diagnostic>),
}

#[derive(Debug, Clone)]
pub struct SimRun {
    pub stdout: String,
    pub stderr: String,
    pub timed_out: bool,
    pub exit_code: Option<i32>,
    pub elapsed: Duration,
}

/// Compile-and-simulate of a design against a testbench.
#[derive(Debug, Clone)]
pub enum TestRun {
    CompileError(Vec<Diagnostic>),
    Timeout { elapsed: Duration },
    Completed { report: SimReport, stdout: String },
}

#[derive(Debug, Clone)]
pub struct Toolchain {
    config: ToolchainConfig,
}

fn quote(s: &str) -> String {
    shlex::try_quote(s).map(|c| c.into_owned()).unwrap_or_else(|_| s.to_string())
}

fn missing(out: &ExecOutput, template: &str) -> Option<ToolchainError> {
    let code = out.status.and_then(|s| s.code());
    if code == Some(127) && out.stderr.contains("not found") {
        let program = template.split_whitespace().next().unwrap_or(template).to_string();
        return Some(ToolchainError::Missing(program));
    }
    None
}

impl Toolchain {
    pub fn new(config: ToolchainConfig) -> Self {
        Self { config }
    }

    pub fn config(&self) -> &ToolchainConfig {
        &self.config
    }

    fn expand(&self, template: &str, sources: &[&str], artifact: &Path, top: &str, workdir: &Path) -> String {
        let cache = self
            .config
            .cache_dir
            .clone()
            .unwrap_or_else(|| workdir.join("cache"));
        template
            .replace("{sources}", &sources.iter().map(|s| quote(s)).collect::<Vec<_>>().join(" "))
            .replace("{artifact}", &quote(&artifact.display().to_string()))
            .replace("{top}", &quote(top))
            .replace("{workdir}", &quote(&workdir.display().to_string()))
            .replace("{cache}", &quote(&cache.display().to_string()))
    }

    fn workdir(&self) -> std::io::Result<TempDir> {
        let mut b = tempfile::Builder::new();
        b.prefix("avx-");
        match &self.config.scratch_dir {
            Some(root) => {
                fs::create_dir_all(root)?;
                b.tempdir_in(root)
            }
            None => b.tempdir(),
        }
    }

    /// Writes `sources` into a fresh work directory and builds them with
    /// `top` as the root module.
    pub fn compile(&self, sources: &[SourceFile], top: &str) -> Result<Compiled, ToolchainError> {
        if sources.is_empty() {
            return Err(ToolchainError::NoSources);
        }
        let dir = self.workdir()?;
        let mut names = Vec::new();
        for s in sources {
            let ok = !s.name.is_empty()
                && s.name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'))
                && !s.name.starts_with('.');
            if !ok {
                return Err(ToolchainError::BadSourceName(s.name.clone()));
            }
            fs::write(dir.path().join(&s.name), &s.text)?;
            names.push(s.name.as_str());
        }
        let artifact = dir.path().join("simv");
        let cmd = self.expand(&self.config.compile_cmd, &names, &artifact, top, dir.path());
        debug!(%cmd, "compile");
        let out = run_shell(&cmd, dir.path(), Duration::from_secs_f64(self.config.timeout_s))?;
        if out.timed_out {
            return Ok(Compiled::Failed(vec![Diagnostic::error(format!(
                "compilation did not finish within {} s",
                self.config.timeout_s
            ))]));
        }
        if let Some(e) = missing(&out, &self.config.compile_cmd) {
            return Err(e);
        }
        let mut diags = parse_diagnostics(&out.combined());
        if out.success() && artifact.exists() {
            return Ok(Compiled::Built(Artifact {
                workdir: dir,
                path: artifact,
                warnings: diags,
            }));
        }
        if !diags.iter().any(Diagnostic::is_error) {
            let mut raw = out.combined();
            if raw.trim().is_empty() {
                raw = format!("compiler exited with {:?} and no output", out.status.and_then(|s| s.code()));
            }
            if raw.len() > MAX_RAW_DIAGNOSTIC {
                let cut = (0..=MAX_RAW_DIAGNOSTIC).rev().find(|&i| raw.is_char_boundary(i)).unwrap_or(0);
                raw.truncate(cut);
            }
            diags.push(Diagnostic::error(raw.trim_end()));
        }
        Ok(Compiled::Failed(diags))
    }

    pub fn simulate(&self, artifact: &Artifact, timeout: Duration) -> Result<SimRun, ToolchainError> {
        let cmd = self.expand(&self.config.run_cmd, &[], artifact.path(), "", artifact.workdir());
        debug!(%cmd, "simulate");
        let out = run_shell(&cmd, artifact.workdir(), timeout)?;
        if let Some(e) = missing(&out, &self.config.run_cmd) {
            return Err(e);
        }
        Ok(SimRun {
            exit_code: out.status.and_then(|s| s.code()),
            stdout: out.stdout,
            stderr: out.stderr,
            timed_out: out.timed_out,
            elapsed: out.elapsed,
        })
    }

    /// Builds `design` with the testbench on top, runs it, and reads the
    /// mismatch report.
    pub fn run_testbench(&self, spec: &ProblemSpec, design: &str, tb: &TestbenchSource, timeout: Duration) -> Result<TestRun, ToolchainError> {
        self.run_with_top(spec, design, &tb.source, &tb.top, timeout)
    }

    /// Like `run_testbench` for a testbench given as text with an explicit
    /// top module.
    pub fn run_with_top(&self, spec: &ProblemSpec, design: &str, testbench: &str, top: &str, timeout: Duration) -> Result<TestRun, ToolchainError> {
        let sources = [SourceFile::new(DESIGN_FILE, design), SourceFile::new(TESTBENCH_FILE, testbench)];
        let artifact = match self.compile(&sources, top)? {
            Compiled::Failed(d) => return Ok(TestRun::CompileError(d)),
            Compiled::Built(a) => a,
        };
        let run = self.simulate(&artifact, timeout)?;
        if run.timed_out {
            return Ok(TestRun::Timeout { elapsed: run.elapsed });
        }
        let mut report = parse_sim_output(&run.stdout, spec);
        if report.verdict == Verdict::Malformed && run.exit_code != Some(0) {
            let why = report.problem.take().unwrap_or_default();
            report.problem = Some(format!(
                "{why}; simulator exited with {:?}: {}",
                run.exit_code,
                run.stderr.trim()
            ));
        }
        Ok(TestRun::Completed {
            report,
            stdout: run.stdout,
        })
    }
}

/// Compiles a design with a testbench on top and reports the run.
///
/// The stage controllers and the evaluator depend on this rather than on
/// `Toolchain` so that they can be driven by canned results.
pub trait HdlRunner: Send + Sync {
    fn run(&self, spec: &ProblemSpec, design: &str, testbench: &str, top: &str, timeout: Duration) -> Result<TestRun, ToolchainError>;
}

impl HdlRunner for Toolchain {
    fn run(&self, spec: &ProblemSpec, design: &str, testbench: &str, top: &str, timeout: Duration) -> Result<TestRun, ToolchainError> {
        self.run_with_top(spec, design, testbench, top, timeout)
    }
}
