// SPDX-License-Identifier: Apache-2.0
//! pass@k, false positive rate, and the per-problem tallies they read.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("pass@k needs 0 <= c <= n and 1 <= k <= n (got n={n}, c={c}, k={k})")]
    Domain { n: u32, c: u32, k: u32 },
}

/// Unbiased pass@k estimate: the chance that a random `k`-subset of `n`
/// samples, `c` of them correct, holds at least one correct sample.
///
/// Evaluated as `1 - prod_{j<k} (n-c-j)/(n-j)`, which never forms the
/// binomials themselves.
pub fn pass_at_k(n: u32, c: u32, k: u32) -> Result<f64, MetricError> {
    if c > n || k == 0 || k > n {
        return Err(MetricError::Domain { n, c, k });
    }
    if n - c < k {
        return Ok(1.0);
    }
    if k == 1 {
        // the product form would round 1 - (n-c)/n; c/n is the same value, exact
        return Ok(f64::from(c) / f64::from(n));
    }
    let mut miss = 1.0;
    for j in 0..k {
        miss *= f64::from(n - c - j) / f64::from(n - j);
    }
    Ok(1.0 - miss)
}

/// How stage 1 fared on a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Summary {
    pub status: String,
    /// The reference model ran on its vectors.
    pub syntactic: bool,
    /// The reference trace, replayed as a module, passes the golden
    /// testbench without leaving the traced path. `None` when stage 1
    /// failed or no golden testbench could be applied.
    pub functional: Option<bool>,
    pub line_coverage: Option<f64>,
}

/// Sample tallies of one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemResult {
    pub problem_id: String,
    pub n: u32,
    /// Golden-correct samples.
    pub c: u32,
    /// Samples accepted by the stage-1 testbench.
    pub c_tb: u32,
    /// Samples both accepted and golden-correct.
    pub c_tb_correct: u32,
    pub stage1: Stage1Summary,
    /// Outcome digests by sample index; empty where a sample crashed.
    pub sample_digests: Vec<String>,
    /// Set when the problem is excluded from the aggregates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invalid: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ProblemResult {
    pub fn is_valid(&self) -> bool {
        self.invalid.is_none()
    }

    pub fn pass_at_k(&self, k: u32) -> Option<f64> {
        pass_at_k(self.n, self.c, k).ok()
    }
}

/// Share of testbench-accepted samples that are golden-incorrect, pooled
/// over the valid problems. `None` when nothing was accepted.
pub fn fpr(results: &[ProblemResult]) -> Option<f64> {
    let (accepted, correct) = results
        .iter()
        .filter(|r| r.is_valid())
        .fold((0u64, 0u64), |(a, c), r| (a + u64::from(r.c_tb), c + u64::from(r.c_tb_correct)));
    if accepted == 0 {
        return None;
    }
    Some(1.0 - correct as f64 / accepted as f64)
}

/// Mean pass@k over the valid problems; `None` if some problem has fewer
/// than `k` samples or there is no valid problem.
pub fn mean_pass_at_k(results: &[ProblemResult], k: u32) -> Option<f64> {
    let valid: Vec<&ProblemResult> = results.iter().filter(|r| r.is_valid()).collect();
    if valid.is_empty() {
        return None;
    }
    let mut sum = 0.0;
    for r in &valid {
        sum += r.pass_at_k(k)?;
    }
    Some(sum / valid.len() as f64)
}
