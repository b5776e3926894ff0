// SPDX-License-Identifier: Apache-2.0
//! Benchmark sweeps: n stage-2 samples per problem on top of one stage-1
//! run, judged against golden testbenches and summarized as pass@k, FPR
//! and reference-model quality.
//!
//! Every finished cell goes to an append-only journal before anything is
//! aggregated, so an interrupted sweep resumes where it stopped and the
//! report can always be rebuilt from the journal alone.

mod journal;
mod judge;
mod metrics;
mod report;

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;
use tracing::{info, warn};

use crate::model::ProblemSpec;
use crate::pipeline::{Pipeline, Stage1Status};

pub use journal::{Journal, JournalEntry, SampleRecord, Stage1Record};
pub use judge::{check_golden, golden_testbench, judge_reference, judge_sample, stub_module, JudgeError, Judgement};
pub use metrics::{fpr, mean_pass_at_k, pass_at_k, MetricError, ProblemResult, Stage1Summary};
pub use report::{build_report, BenchmarkReport, Manifest, PassAtK, Stage1Metrics, WallClock, REPORTED_K, STAGE1_FUNCTIONAL_METHOD};

pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Settings(String),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("report: {0}")]
    Report(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Replaces `path` in one step: readers see the old or the new file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), EvalError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let io = |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct BenchSettings {
    pub samples: u32,
    /// Worker threads across (problem, sample) cells.
    pub jobs: usize,
    pub config_digest: String,
    /// Recorded in the manifest and the report.
    pub config: serde_json::Value,
}

fn panic_text(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".into())
}

fn stage1_cell(spec: &ProblemSpec, pipeline: &Pipeline<'_>, digest: &str) -> Stage1Record {
    let start = Instant::now();
    let timeout = pipeline.budget.sim_timeout;
    let run = catch_unwind(AssertUnwindSafe(|| pipeline.run_stage1(spec)));
    let (result, mut error) = match run {
        Ok(Ok(r)) => (Some(r), None),
        Ok(Err(e)) => (None, Some(e.to_string())),
        Err(p) => (None, Some(format!("panicked: {}", panic_text(p)))),
    };
    let usable = result.as_ref().filter(|r| r.status != Stage1Status::FailReference);
    let mut invalid = None;
    let mut functional = None;
    if spec.golden_testbench.is_none() {
        invalid = Some("no golden testbench".to_string());
    } else {
        let judged = match usable {
            Some(r) => judge_reference(spec, &r.trace, pipeline.runner, timeout).map(Some),
            None => check_golden(spec, pipeline.runner, timeout).map(|()| None),
        };
        match judged {
            Ok(f) => functional = f,
            Err(e @ (JudgeError::InvalidGolden { .. } | JudgeError::NoTop(_))) => invalid = Some(e.to_string()),
            Err(e) => {
                let msg = format!("judging the reference trace: {e}");
                error = Some(error.map_or(msg.clone(), |prev| format!("{prev}; {msg}")));
            }
        }
    }
    let summary = Stage1Summary {
        status: result.as_ref().map_or("crashed", |r| r.status.as_str()).to_string(),
        syntactic: usable.is_some(),
        functional,
        line_coverage: usable.and_then(|r| r.coverage.as_ref()).map(|c| c.ratio),
    };
    Stage1Record {
        problem_id: spec.id.clone(),
        config_digest: digest.to_string(),
        summary,
        result,
        invalid,
        error,
        elapsed_s: start.elapsed().as_secs_f64(),
    }
}

fn sample_cell(spec: &ProblemSpec, pipeline: &Pipeline<'_>, s1: &Stage1Record, sample: u32) -> SampleRecord {
    let start = Instant::now();
    let mut rec = SampleRecord {
        problem_id: spec.id.clone(),
        sample,
        config_digest: s1.config_digest.clone(),
        status: None,
        judgement: Judgement {
            golden_correct: false,
            tb_pass: false,
        },
        outcome_digest: None,
        error: None,
        elapsed_s: 0.0,
        outcome: None,
    };
    let Some(result) = &s1.result else {
        rec.error = Some("not run: stage 1 crashed".into());
        return rec;
    };
    let timeout = pipeline.budget.sim_timeout;
    let run = catch_unwind(AssertUnwindSafe(|| {
        let outcome = pipeline.complete(spec, result, sample)?;
        let judged = judge_sample(&outcome, spec, pipeline.runner, timeout);
        Ok::<_, crate::pipeline::StageError>((outcome, judged))
    }));
    match run {
        Ok(Ok((outcome, judged))) => {
            rec.status = Some(outcome.status);
            rec.outcome_digest = Some(outcome.digest());
            match judged {
                Ok(j) => rec.judgement = j,
                Err(e) => {
                    rec.judgement.tb_pass = outcome.status == crate::model::PipelineStatus::Pass;
                    rec.error = Some(format!("golden judging failed: {e}"));
                }
            }
            rec.outcome = Some(outcome);
        }
        Ok(Err(e)) => rec.error = Some(e.to_string()),
        Err(p) => rec.error = Some(format!("panicked: {}", panic_text(p))),
    }
    if let Some(e) = &rec.error {
        warn!(problem = %spec.id, sample, error = %e, "sample recorded as incorrect");
    }
    rec.elapsed_s = start.elapsed().as_secs_f64();
    rec
}

/// Runs or resumes a sweep in `out_dir` and writes the report there.
///
/// Cells already in the journal under the same config digest are not run
/// again; stage 1 of a problem runs once and feeds all of its samples.
pub fn run_benchmark(problems: &[ProblemSpec], pipeline: &Pipeline<'_>, settings: &BenchSettings, out_dir: &Path) -> Result<BenchmarkReport, EvalError> {
    if settings.samples == 0 {
        return Err(EvalError::Settings("samples must be at least 1".into()));
    }
    fs::create_dir_all(out_dir).map_err(|source| EvalError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let digest = settings.config_digest.as_str();
    let journal_path = out_dir.join(JOURNAL_FILE);
    let mut stage1_done: HashMap<String, Stage1Record> = HashMap::new();
    let mut samples_done: HashSet<(String, u32)> = HashSet::new();
    for e in Journal::read(&journal_path)?.into_iter().filter(|e| e.config_digest() == digest) {
        match e {
            JournalEntry::Stage1(r) => {
                stage1_done.entry(r.problem_id.clone()).or_insert(r);
            }
            JournalEntry::Sample(r) => {
                samples_done.insert((r.problem_id, r.sample));
            }
        }
    }
    let manifest = Manifest {
        config_digest: digest.to_string(),
        samples: settings.samples,
        problem_ids: problems.iter().map(|p| p.id.clone()).collect(),
        config: settings.config.clone(),
    };
    let manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write_atomic(&out_dir.join(MANIFEST_FILE), manifest_json.as_bytes())?;
    let journal = Journal::open(&journal_path)?;
    let resumed = samples_done.len();
    info!(problems = problems.len(), samples = settings.samples, resumed, "benchmark sweep");

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.jobs.max(1))
        .build()
        .map_err(|e| EvalError::Pool(e.to_string()))?;
    pool.install(|| {
        problems.par_iter().try_for_each(|spec| {
            let s1 = match stage1_done.get(&spec.id) {
                Some(r) => r.clone(),
                None => {
                    let r = stage1_cell(spec, pipeline, digest);
                    info!(problem = %spec.id, status = %r.summary.status, "stage 1 finished");
                    journal.append(&JournalEntry::Stage1(r.clone()))?;
                    r
                }
            };
            if s1.invalid.is_some() {
                return Ok(());
            }
            (0..settings.samples)
                .into_par_iter()
                .filter(|i| !samples_done.contains(&(spec.id.clone(), *i)))
                .try_for_each(|i| {
                    let rec = sample_cell(spec, pipeline, &s1, i);
                    info!(problem = %spec.id, sample = i, status = ?rec.status, golden = rec.judgement.golden_correct, "sample finished");
                    journal.append(&JournalEntry::Sample(rec))
                })
        })
    })?;

    let report = build_report(&manifest, &Journal::read(&journal_path)?);
    report.write(out_dir)?;
    Ok(report)
}

/// Rebuilds the report of a sweep directory from its manifest and journal.
pub fn regenerate_report(out_dir: &Path) -> Result<BenchmarkReport, EvalError> {
    let path = out_dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|source| EvalError::Io { path: path.clone(), source })?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| EvalError::Report(format!("{}: {e}", path.display())))?;
    let report = build_report(&manifest, &Journal::read(&out_dir.join(JOURNAL_FILE))?);
    report.write(out_dir)?;
    Ok(report)
}
