// SPDX-License-Identifier: Apache-2.0
//! Benchmark report: pure aggregation over journal entries, plus writers.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::journal::{JournalEntry, SampleRecord, Stage1Record};
use super::metrics::{fpr, mean_pass_at_k, ProblemResult, Stage1Summary};
use super::{write_atomic, EvalError};

/// k values reported for pass@k.
pub const REPORTED_K: [u32; 3] = [1, 5, 10];

/// How stage-1 functional correctness is measured, stated in every report.
pub const STAGE1_FUNCTIONAL_METHOD: &str =
    "reference trace rendered as a Verilog module and run against the golden testbench; leaving the traced stimulus counts as incorrect";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassAtK {
    pub k: u32,
    /// `None` when some problem has fewer than `k` samples.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Metrics {
    /// Valid problems the percentages are over.
    pub problems: u32,
    /// Percent of problems whose reference model runs.
    pub syntactic_correctness: Option<f64>,
    /// Percent of problems whose reference trace passes the golden testbench.
    pub functional_correctness: Option<f64>,
    /// Mean line coverage (percent) over problems with a running model.
    pub mean_line_coverage: Option<f64>,
    pub functional_method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallClock {
    pub stage1_s: f64,
    pub samples_s: f64,
    pub mean_sample_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config_digest: String,
    pub samples_per_problem: u32,
    pub config: serde_json::Value,
    pub problems: Vec<ProblemResult>,
    pub pass_at_k: Vec<PassAtK>,
    pub fpr: Option<f64>,
    pub stage1: Stage1Metrics,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Summed from the per-cell times in the journal.
    pub wall_clock: WallClock,
}

/// Which problems and how many samples a sweep covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_digest: String,
    pub samples: u32,
    pub problem_ids: Vec<String>,
    pub config: serde_json::Value,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn percent(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

fn problem_row(id: &str, samples: u32, s1: Option<&Stage1Record>, cells: &HashMap<u32, &SampleRecord>) -> ProblemResult {
    let mut notes = Vec::new();
    let stage1 = match s1 {
        Some(r) => {
            if let Some(e) = &r.error {
                notes.push(format!("stage 1: {e}"));
            }
            r.summary.clone()
        }
        None => {
            notes.push("no stage-1 record in the journal".into());
            Stage1Summary {
                status: "missing".into(),
                syntactic: false,
                functional: None,
                line_coverage: None,
            }
        }
    };
    let invalid = s1.and_then(|r| r.invalid.clone());
    let mut row = ProblemResult {
        problem_id: id.to_string(),
        n: 0,
        c: 0,
        c_tb: 0,
        c_tb_correct: 0,
        stage1,
        sample_digests: Vec::new(),
        invalid,
        notes,
    };
    if row.invalid.is_some() {
        return row;
    }
    let mut missing = 0;
    for i in 0..samples {
        let Some(cell) = cells.get(&i) else {
            missing += 1;
            continue;
        };
        row.n += 1;
        let j = cell.judgement;
        row.c += u32::from(j.golden_correct);
        row.c_tb += u32::from(j.tb_pass);
        row.c_tb_correct += u32::from(j.golden_correct && j.tb_pass);
        row.sample_digests.push(cell.outcome_digest.clone().unwrap_or_default());
        if let Some(e) = &cell.error {
            row.notes.push(format!("sample {i}: {e}"));
        }
    }
    if missing > 0 {
        row.notes.push(format!("{missing} of {samples} samples missing from the journal"));
    }
    row
}

/// Builds the report from journal entries alone. The first record of a
/// cell under `manifest.config_digest` wins; everything else is ignored.
pub fn build_report(manifest: &Manifest, entries: &[JournalEntry]) -> BenchmarkReport {
    let digest = manifest.config_digest.as_str();
    let mut s1: HashMap<&str, &Stage1Record> = HashMap::new();
    let mut cells: HashMap<&str, HashMap<u32, &SampleRecord>> = HashMap::new();
    let (mut stage1_s, mut samples_s, mut timed) = (0.0, 0.0, 0usize);
    for e in entries.iter().filter(|e| e.config_digest() == digest) {
        match e {
            JournalEntry::Stage1(r) => {
                if !s1.contains_key(r.problem_id.as_str()) {
                    stage1_s += r.elapsed_s;
                    s1.insert(&r.problem_id, r);
                }
            }
            JournalEntry::Sample(r) => {
                let per = cells.entry(&r.problem_id).or_default();
                if r.sample < manifest.samples && !per.contains_key(&r.sample) {
                    samples_s += r.elapsed_s;
                    timed += 1;
                    per.insert(r.sample, r);
                }
            }
        }
    }
    let empty = HashMap::new();
    let problems: Vec<ProblemResult> = manifest
        .problem_ids
        .iter()
        .map(|id| problem_row(id, manifest.samples, s1.get(id.as_str()).copied(), cells.get(id.as_str()).unwrap_or(&empty)))
        .collect();

    let valid: Vec<&ProblemResult> = problems.iter().filter(|p| p.is_valid()).collect();
    let syntactic = valid.iter().filter(|p| p.stage1.syntactic).count();
    let functional = valid.iter().filter(|p| p.stage1.functional == Some(true)).count();
    let coverages: Vec<f64> = valid.iter().filter_map(|p| p.stage1.line_coverage).map(|r| 100.0 * r).collect();
    let notes = problems
        .iter()
        .filter_map(|p| p.invalid.as_ref().map(|why| format!("{} excluded: {why}", p.problem_id)))
        .collect();
    BenchmarkReport {
        config_digest: manifest.config_digest.clone(),
        samples_per_problem: manifest.samples,
        config: manifest.config.clone(),
        pass_at_k: REPORTED_K
            .iter()
            .map(|&k| PassAtK {
                k,
                value: mean_pass_at_k(&problems, k),
            })
            .collect(),
        fpr: fpr(&problems),
        stage1: Stage1Metrics {
            problems: valid.len() as u32,
            syntactic_correctness: percent(syntactic, valid.len()),
            functional_correctness: percent(functional, valid.len()),
            mean_line_coverage: mean(&coverages),
            functional_method: STAGE1_FUNCTIONAL_METHOD.into(),
        },
        problems,
        notes,
        wall_clock: WallClock {
            stage1_s,
            samples_s,
            mean_sample_s: (timed > 0).then(|| samples_s / timed as f64),
        },
    }
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "N/A".to_string(), |x| format!("{x:.digits$}"))
}

impl BenchmarkReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per problem.
    pub fn to_csv(&self) -> Result<String, EvalError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["problem_id".to_string(), "n".into(), "c".into(), "c_tb".into(), "c_tb_correct".into()];
        header.extend(REPORTED_K.iter().map(|k| format!("pass@{k}")));
        header.extend(["stage1_status", "stage1_syntactic", "stage1_functional", "line_coverage", "invalid"].map(String::from));
        w.write_record(&header)?;
        for p in &self.problems {
            let mut rec = vec![p.problem_id.clone(), p.n.to_string(), p.c.to_string(), p.c_tb.to_string(), p.c_tb_correct.to_string()];
            rec.extend(REPORTED_K.iter().map(|&k| opt(p.is_valid().then(|| p.pass_at_k(k)).flatten(), 4)));
            rec.push(p.stage1.status.clone());
            rec.push(p.stage1.syntactic.to_string());
            rec.push(p.stage1.functional.map_or_else(|| "N/A".into(), |b| b.to_string()));
            rec.push(opt(p.stage1.line_coverage, 4));
            rec.push(p.invalid.clone().unwrap_or_default());
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| EvalError::Report(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv of strings is utf-8"))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let id_w = self.problems.iter().map(|p| p.problem_id.len()).max().unwrap_or(7).max(7);
        let _ = writeln!(s, "{:id_w$}  {:>3}  {:>3}  {:>4}  {:>7}  {:<26}  {:>8}  {:>10}", "problem", "n", "c", "c_tb", "pass@1", "stage 1", "coverage", "functional");
        for p in &self.problems {
            let pass1 = if p.is_valid() { opt(p.pass_at_k(1), 3) } else { "invalid".into() };
            let _ = writeln!(
                s,
                "{:id_w$}  {:>3}  {:>3}  {:>4}  {:>7}  {:<26}  {:>8}  {:>10}",
                p.problem_id,
                p.n,
                p.c,
                p.c_tb,
                pass1,
                p.stage1.status,
                p.stage1.line_coverage.map_or_else(|| "N/A".into(), |r| format!("{:.1}%", 100.0 * r)),
                p.stage1.functional.map_or("N/A", |b| if b { "yes" } else { "no" }),
            );
        }
        s.push('\n');
        for pk in &self.pass_at_k {
            let _ = writeln!(s, "pass@{:<3} {}", pk.k, pk.value.map_or_else(|| "N/A".into(), |v| format!("{:.2}%", 100.0 * v)));
        }
        let _ = writeln!(s, "FPR      {}", self.fpr.map_or_else(|| "N/A".into(), |v| format!("{:.2}%", 100.0 * v)));
        let pct = |v: Option<f64>| v.map_or_else(|| "N/A".into(), |v| format!("{v:.1}%"));
        let _ = writeln!(s, "stage 1 over {} problems: syntactic {}, functional {}, mean line coverage {}", self.stage1.problems, pct(self.stage1.syntactic_correctness), pct(self.stage1.functional_correctness), pct(self.stage1.mean_line_coverage));
        let _ = writeln!(s, "stage 1 functional correctness: {}", self.stage1.functional_method);
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        let _ = writeln!(s, "config {}  samples/problem {}", &self.config_digest[..self.config_digest.len().min(12)], self.samples_per_problem);
        s
    }

    /// Writes `report.json`, `report.csv` and `report.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), EvalError> {
        write_atomic(&dir.join("report.json"), self.to_json().as_bytes())?;
        write_atomic(&dir.join("report.csv"), self.to_csv()?.as_bytes())?;
        write_atomic(&dir.join("report.txt"), self.to_text().as_bytes())
    }
}
