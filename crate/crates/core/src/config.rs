// SPDX-License-Identifier: Apache-2.0
//! The single JSON run configuration and the objects built from it.
//!
//! Secrets never live in the file: live backends read their key from
//! [`API_KEY_ENV`](crate::llm::API_KEY_ENV). Relative paths are resolved
//! against the directory of the config file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{HarnessError, ModelHarness, ProcessHarness, ReplayHarness};
use crate::llm::{ChatBackend, Gateway, GatewayError, LiveBackend, ModelParams, ReplayBackend, RetryPolicy};
use crate::model::{sha256_hex, RunBudget};
use crate::pipeline::Stage1Options;
use crate::prompt::{PromptError, TemplateSet};
use crate::testbench::TestbenchOptions;
use crate::toolchain::ToolchainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("config: {0}")]
    Invalid(String),
    #[error("backend `{name}`: {source}")]
    Backend {
        name: String,
        #[source]
        source: GatewayError,
    },
    #[error("executor: {0}")]
    Harness(#[from] HarnessError),
    #[error("templates: {0}")]
    Templates(#[from] PromptError),
    #[error("no Verilog toolchain found on PATH (tried iverilog, verilator, verilator-cli); set `toolchain` in the config")]
    ToolchainMissing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// HTTP `/chat/completions` endpoint.
    Live,
    /// Responses served from a transcript file.
    Replay,
}

fn default_timeout_s() -> f64 {
    120.0
}

fn default_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<PathBuf>,
    #[serde(default)]
    pub params: ModelParams,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: f64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ToolchainChoice {
    Preset { preset: String },
    Custom(ToolchainConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum HarnessConfig {
    /// Executor command line; the job goes to its stdin.
    Command(Vec<String>),
    /// Recorded executor results.
    Replay(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub backends: BTreeMap<String, BackendConfig>,
    pub stage1_backend: String,
    pub stage2_backend: String,
    /// Absent: first toolchain found on `PATH`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toolchain: Option<ToolchainChoice>,
    pub harness: HarnessConfig,
    #[serde(default)]
    pub budget: RunBudget,
    #[serde(default)]
    pub stage1: Stage1Options,
    #[serde(default)]
    pub testbench: TestbenchOptions,
    /// Directory of prompt template overrides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates_dir: Option<PathBuf>,
}

/// What decides the content of outcomes; its digest keys the journal.
#[derive(Serialize)]
struct Snapshot<'a> {
    stage1_backend: &'a BackendConfig,
    stage2_backend: &'a BackendConfig,
    toolchain: &'a Option<ToolchainChoice>,
    harness: &'a HarnessConfig,
    budget: &'a RunBudget,
    stage1: &'a Stage1Options,
    testbench: &'a TestbenchOptions,
    templates_dir: &'a Option<PathBuf>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.into(),
            source,
        })?;
        let mut cfg: Config = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.into(),
            source,
        })?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = serde_json::from_str(text).map_err(|source| ConfigError::Parse {
            path: PathBuf::from("<inline>"),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        for b in self.backends.values_mut() {
            if let Some(t) = b.transcript.as_mut() {
                fix(t);
            }
        }
        if let HarnessConfig::Replay(p) = &mut self.harness {
            fix(p);
        }
        if let Some(t) = self.templates_dir.as_mut() {
            fix(t);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for name in [&self.stage1_backend, &self.stage2_backend] {
            self.backend(name)?;
        }
        for (name, b) in &self.backends {
            let bad = |why: &str| ConfigError::Invalid(format!("backend `{name}`: {why}"));
            match b.kind {
                BackendKind::Live if b.base_url.is_none() => return Err(bad("a live backend needs `base_url`")),
                BackendKind::Replay if b.transcript.is_none() => return Err(bad("a replay backend needs `transcript`")),
                _ => {}
            }
            if !(b.timeout_s > 0.0 && b.timeout_s.is_finite()) {
                return Err(bad("`timeout_s` must be positive"));
            }
        }
        if let HarnessConfig::Command(argv) = &self.harness {
            if argv.is_empty() {
                return Err(ConfigError::Invalid("`harness.command` is empty".into()));
            }
        }
        self.budget.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.stage1.model_time_limit.is_zero() {
            return Err(ConfigError::Invalid("`stage1.model_time_limit` must be positive".into()));
        }
        Ok(())
    }

    pub fn backend(&self, name: &str) -> Result<&BackendConfig, ConfigError> {
        self.backends.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.backends.keys().map(String::as_str).collect();
            ConfigError::Invalid(format!("unknown backend `{name}` (defined: {})", known.join(", ")))
        })
    }

    /// Canonical JSON of everything that shapes an outcome: the two
    /// selected backends rather than the whole table.
    pub fn snapshot(&self) -> serde_json::Value {
        let snap = Snapshot {
            stage1_backend: &self.backends[&self.stage1_backend],
            stage2_backend: &self.backends[&self.stage2_backend],
            toolchain: &self.toolchain,
            harness: &self.harness,
            budget: &self.budget,
            stage1: &self.stage1,
            testbench: &self.testbench,
            templates_dir: &self.templates_dir,
        };
        serde_json::to_value(snap).expect("config serializes")
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.snapshot().to_string().as_bytes())
    }

    pub fn toolchain_config(&self) -> Result<ToolchainConfig, ConfigError> {
        match &self.toolchain {
            None => ToolchainConfig::detect().ok_or(ConfigError::ToolchainMissing),
            Some(ToolchainChoice::Preset { preset }) => ToolchainConfig::preset(preset)
                .ok_or_else(|| ConfigError::Invalid(format!("unknown toolchain preset `{preset}`"))),
            Some(ToolchainChoice::Custom(c)) => Ok(c.clone()),
        }
    }

    pub fn templates(&self) -> Result<TemplateSet, ConfigError> {
        Ok(match &self.templates_dir {
            Some(dir) => TemplateSet::with_overrides(dir)?,
            None => TemplateSet::builtin(),
        })
    }

    pub fn model_harness(&self) -> Result<Box<dyn ModelHarness>, ConfigError> {
        Ok(match &self.harness {
            HarnessConfig::Command(argv) => Box::new(ProcessHarness::new(argv.clone())),
            HarnessConfig::Replay(path) => Box::new(ReplayHarness::open(path)?),
        })
    }
}

impl BackendConfig {
    /// The raw backend. Live backends need the API key in the environment.
    pub fn open(&self, name: &str) -> Result<Box<dyn ChatBackend>, ConfigError> {
        let wrap = |source| ConfigError::Backend {
            name: name.to_string(),
            source,
        };
        Ok(match self.kind {
            BackendKind::Live => {
                let url = self.base_url.as_deref().expect("validated");
                Box::new(LiveBackend::from_env(url, Duration::from_secs_f64(self.timeout_s)).map_err(wrap)?)
            }
            BackendKind::Replay => Box::new(ReplayBackend::open(self.transcript.as_deref().expect("validated")).map_err(wrap)?),
        })
    }

    pub fn gateway(&self, backend: Arc<dyn ChatBackend>) -> Gateway {
        Gateway::new(backend, self.retry.clone(), self.max_in_flight)
    }
}
