// SPDX-License-Identifier: Apache-2.0
//! `autoverifix`: single runs, benchmark sweeps, transcript record/replay
//! and report regeneration.
//!
//! Exit codes: 0 success, 1 run failure, 2 usage or configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context as _};
use autoverifix::config::{BackendKind, Config};
use autoverifix::eval::{regenerate_report, run_benchmark, BenchSettings, JOURNAL_FILE, MANIFEST_FILE};
use autoverifix::harness::{ModelHarness, RecordingHarness, ReplayHarness};
use autoverifix::llm::{ChatBackend, Gateway, ModelParams, RecordingBackend, ReplayBackend};
use autoverifix::model::{load_problems, PipelineOutcome, PipelineStatus, ProblemSpec};
use autoverifix::pipeline::{run_pipeline, Llm, Pipeline, StageError};
use autoverifix::prompt::{vectors_json, PromptForge};
use autoverifix::toolchain::{Toolchain, ToolchainError};
use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "autoverifix", version, about = "Verilog generation checked against an executable reference model")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Setup {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Backend for stage 1, overriding `stage1_backend` in the config.
    #[arg(long)]
    stage1_backend: Option<String>,
    /// Backend for stage 2, overriding `stage2_backend` in the config.
    #[arg(long)]
    stage2_backend: Option<String>,
}

#[derive(Args)]
struct Pick {
    /// Problem file (JSONL).
    problem: PathBuf,
    /// Problem id, when the file holds more than one.
    #[arg(long)]
    id: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run both stages on one problem and write the artifacts.
    Run {
        #[command(flatten)]
        pick: Pick,
        #[command(flatten)]
        setup: Setup,
        /// Artifact directory.
        #[arg(long)]
        out: PathBuf,
        /// Replace an existing artifact directory.
        #[arg(long)]
        force: bool,
    },
    /// Sample every problem and report pass@k, FPR and stage-1 quality.
    Bench {
        /// Problem file (JSONL) with golden testbenches.
        problems: PathBuf,
        #[command(flatten)]
        setup: Setup,
        /// Sweep directory; an existing journal there is resumed.
        #[arg(long)]
        out: PathBuf,
        /// Stage-2 samples per problem.
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
        samples: u32,
        /// Worker threads [default: logical cores, at most 8].
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        jobs: Option<u32>,
        /// Discard the journal and start over.
        #[arg(long)]
        force: bool,
    },
    /// Run one problem through live backends, recording every exchange.
    Record {
        #[command(flatten)]
        pick: Pick,
        /// Transcript directory.
        transcripts: PathBuf,
        #[command(flatten)]
        setup: Setup,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Run one problem from recorded transcripts only.
    Replay {
        #[command(flatten)]
        pick: Pick,
        /// Transcript directory written by `record`.
        transcripts: PathBuf,
        #[command(flatten)]
        setup: Setup,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Rebuild the report of a sweep directory from its journal.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

struct Failure {
    code: u8,
    err: anyhow::Error,
}

fn usage(err: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, err: err.into() }
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        Failure { code: 1, err }
    }
}

/// A missing simulator is a configuration problem, anything else a run
/// failure.
fn stage_failure(e: StageError) -> Failure {
    match e {
        StageError::Toolchain(ToolchainError::Missing(_)) => usage(e),
        e => anyhow!(e).into(),
    }
}

fn load_config(setup: &Setup) -> Result<Config, Failure> {
    let mut cfg = Config::load(&setup.config).map_err(usage)?;
    if let Some(b) = &setup.stage1_backend {
        cfg.stage1_backend = b.clone();
    }
    if let Some(b) = &setup.stage2_backend {
        cfg.stage2_backend = b.clone();
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn pick_problem(pick: &Pick) -> Result<ProblemSpec, Failure> {
    let mut all = load_problems(&pick.problem).map_err(usage)?;
    match &pick.id {
        Some(id) => {
            let i = all
                .iter()
                .position(|p| &p.id == id)
                .ok_or_else(|| usage(anyhow!("no problem `{id}` in {}", pick.problem.display())))?;
            Ok(all.swap_remove(i))
        }
        None if all.len() == 1 => Ok(all.remove(0)),
        None => Err(usage(anyhow!(
            "{} holds {} problems; choose one with --id",
            pick.problem.display(),
            all.len()
        ))),
    }
}

/// Where backends and executor results come from.
enum Source<'a> {
    Config,
    Record(&'a Path),
    Replay(&'a Path),
}

/// Everything a pipeline borrows.
struct Rig {
    gateways: [Gateway; 2],
    params: [ModelParams; 2],
    forge: PromptForge,
    harness: Box<dyn ModelHarness>,
    toolchain: Toolchain,
    cfg: Config,
}

impl Rig {
    fn build(cfg: Config, source: Source<'_>) -> Result<Self, Failure> {
        let names = [cfg.stage1_backend.clone(), cfg.stage2_backend.clone()];
        let mut gateways = Vec::new();
        let mut params = Vec::new();
        for (i, name) in names.iter().enumerate() {
            let b = cfg.backend(name).map_err(usage)?;
            let transcript = |dir: &Path| dir.join(format!("stage{}.jsonl", i + 1));
            let backend: Arc<dyn ChatBackend> = match source {
                Source::Config => Arc::from(b.open(name).map_err(usage)?),
                Source::Record(dir) => {
                    if b.kind != BackendKind::Live {
                        return Err(usage(anyhow!("record needs a live backend, but `{name}` is {:?}", b.kind)));
                    }
                    let live = b.open(name).map_err(usage)?;
                    Arc::new(RecordingBackend::open(live, &transcript(dir)).map_err(usage)?)
                }
                Source::Replay(dir) => Arc::new(ReplayBackend::open(&transcript(dir)).map_err(usage)?),
            };
            gateways.push(b.gateway(backend));
            params.push(b.params.clone());
        }
        let harness: Box<dyn ModelHarness> = match source {
            Source::Config => cfg.model_harness().map_err(usage)?,
            Source::Record(dir) => Box::new(RecordingHarness::open(cfg.model_harness().map_err(usage)?, &dir.join("harness.jsonl")).map_err(usage)?),
            Source::Replay(dir) => {
                let recorded = dir.join("harness.jsonl");
                if recorded.exists() {
                    Box::new(ReplayHarness::open(&recorded).map_err(usage)?)
                } else {
                    cfg.model_harness().map_err(usage)?
                }
            }
        };
        let toolchain = Toolchain::new(cfg.toolchain_config().map_err(usage)?);
        let forge = PromptForge::new(cfg.templates().map_err(usage)?);
        let [g1, g2]: [Gateway; 2] = gateways.try_into().unwrap_or_else(|_| unreachable!());
        let [p1, p2]: [ModelParams; 2] = params.try_into().unwrap_or_else(|_| unreachable!());
        Ok(Self {
            gateways: [g1, g2],
            params: [p1, p2],
            forge,
            harness,
            toolchain,
            cfg,
        })
    }

    fn pipeline(&self) -> Pipeline<'_> {
        let llm = |i: usize| Llm {
            gateway: &self.gateways[i],
            forge: &self.forge,
            params: &self.params[i],
            variant: 0,
        };
        Pipeline {
            stage1: llm(0),
            stage2: llm(1),
            harness: self.harness.as_ref(),
            runner: &self.toolchain,
            budget: &self.cfg.budget,
            stage1_options: &self.cfg.stage1,
            testbench_options: &self.cfg.testbench,
        }
    }
}

fn refuse_existing(out: &Path, force: bool) -> Result<(), Failure> {
    let occupied = out.exists() && fs::read_dir(out).map(|mut d| d.next().is_some()).unwrap_or(true);
    if occupied && !force {
        return Err(usage(anyhow!("{} already exists; pass --force to replace it", out.display())));
    }
    Ok(())
}

/// Writes the artifacts into a sibling temp directory, then swaps it in.
fn write_artifacts(out: &Path, o: &PipelineOutcome) -> anyhow::Result<()> {
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
    let staging = tempfile::Builder::new().prefix(".autoverifix-").tempdir_in(&parent)?;
    let files: [(&str, String); 7] = [
        ("outcome.json", serde_json::to_string_pretty(o)? + "\n"),
        ("reference_model.py", o.reference_source.clone()),
        ("test_vectors.json", vectors_json(&o.test_vectors) + "\n"),
        ("reference_trace.json", serde_json::to_string_pretty(&o.reference_trace)? + "\n"),
        ("testbench.v", o.testbench_source.clone()),
        ("design.v", o.verilog_source.clone()),
        ("iteration_log.json", serde_json::to_string_pretty(&o.iteration_log)? + "\n"),
    ];
    for (name, text) in files {
        fs::write(staging.path().join(name), text).with_context(|| format!("writing {name}"))?;
    }
    let fresh = staging.keep();
    if out.exists() {
        let old = tempfile::Builder::new().prefix(".autoverifix-old-").tempdir_in(&parent)?.keep();
        fs::rename(out, old.join("previous")).with_context(|| format!("moving {} aside", out.display()))?;
        fs::rename(&fresh, out)?;
        fs::remove_dir_all(&old)?;
    } else {
        fs::rename(&fresh, out)?;
    }
    Ok(())
}

fn single(pick: &Pick, setup: &Setup, source: Source<'_>, out: Option<&Path>, force: bool, pass_required: bool) -> Result<ExitCode, Failure> {
    if let Some(out) = out {
        refuse_existing(out, force)?;
    }
    let spec = pick_problem(pick)?;
    let rig = Rig::build(load_config(setup)?, source)?;
    let outcome = run_pipeline(&spec, &rig.pipeline()).map_err(stage_failure)?;
    if let Some(out) = out {
        write_artifacts(out, &outcome)?;
    }
    println!("problem {}: {}", spec.id, outcome.status.as_str());
    println!("outcome digest {}", outcome.digest());
    if pass_required && outcome.status != PipelineStatus::Pass {
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get()).min(8)
}

fn bench(problems: &Path, setup: &Setup, out: &Path, samples: u32, jobs: Option<u32>, force: bool) -> Result<ExitCode, Failure> {
    let specs = load_problems(problems).map_err(usage)?;
    let rig = Rig::build(load_config(setup)?, Source::Config)?;
    if force {
        for name in [JOURNAL_FILE, MANIFEST_FILE, "report.json", "report.csv", "report.txt"] {
            let p = out.join(name);
            if p.exists() {
                fs::remove_file(&p).with_context(|| format!("removing {}", p.display()))?;
            }
        }
    }
    let settings = BenchSettings {
        samples,
        jobs: jobs.map_or_else(default_jobs, |j| j as usize),
        config_digest: rig.cfg.digest(),
        config: rig.cfg.snapshot(),
    };
    let report = run_benchmark(&specs, &rig.pipeline(), &settings, out).map_err(|e| anyhow!(e))?;
    print!("{}", report.to_text());
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.cmd {
        Cmd::Run { pick, setup, out, force } => single(&pick, &setup, Source::Config, Some(&out), force, true),
        Cmd::Bench {
            problems,
            setup,
            out,
            samples,
            jobs,
            force,
        } => bench(&problems, &setup, &out, samples, jobs, force),
        Cmd::Record {
            pick,
            transcripts,
            setup,
            out,
            force,
        } => single(&pick, &setup, Source::Record(&transcripts), out.as_deref(), force, false),
        Cmd::Replay {
            pick,
            transcripts,
            setup,
            out,
            force,
        } => {
            if !transcripts.is_dir() {
                return Err(usage(anyhow!("transcript directory {} does not exist", transcripts.display())));
            }
            single(&pick, &setup, Source::Replay(&transcripts), out.as_deref(), force, false)
        }
        Cmd::Report { out } => {
            let report = regenerate_report(&out).map_err(|e| match e {
                autoverifix::eval::EvalError::Io { .. } => usage(e),
                e => anyhow!(e).into(),
            })?;
            print!("{}", report.to_text());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let filter = EnvFilter::try_from_env("AUTOVERIFIX_LOG").unwrap_or_else(|_| EnvFilter::new("warn,autoverifix=info"));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

