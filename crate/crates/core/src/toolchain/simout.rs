// SPDX-License-Identifier: Apache-2.0
//! The testbench's mismatch grammar: parsing and composing.

use std::fmt::Write as _;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::model::{parse_sim_hex, Discrepancy, Logic, ProblemSpec};

static MISMATCH: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^MISMATCH cycle=(\d+) signal=(\S+) expected=([0-9a-fA-FxXzZ]+) observed=([0-9a-fA-FxXzZ]+)$").unwrap()
});
static RESULT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^RESULT (pass|fail) mismatches=(\d+)$").unwrap());

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimReport {
    pub discrepancies: Vec<Discrepancy>,
    pub verdict: Verdict,
    /// Why the output was judged malformed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<String>,
}

impl SimReport {
    fn malformed(discrepancies: Vec<Discrepancy>, why: String) -> Self {
        Self {
            discrepancies,
            verdict: Verdict::Malformed,
            problem: Some(why),
        }
    }
}

/// Reads MISMATCH and RESULT lines; everything else is ignored.
///
/// The verdict is `pass` only for a single `RESULT pass mismatches=0` with
/// no MISMATCH lines, and `fail` only when a single RESULT line agrees with
/// the MISMATCH count. Any other combination, an undeclared signal, or a
/// value that does not fit its port is `malformed`.
pub fn parse_sim_output(stdout: &str, spec: &ProblemSpec) -> SimReport {
    let mut ds = Vec::new();
    let mut results: Vec<(bool, u64)> = Vec::new();
    for line in stdout.lines() {
        let line = line.trim();
        if let Some(c) = MISMATCH.captures(line) {
            let Some(width) = spec.output_width(&c[2]) else {
                return SimReport::malformed(ds, format!("MISMATCH names unknown output `{}`", &c[2]));
            };
            let (Ok(cycle), Ok(exp), Ok(obs)) = (c[1].parse::<u64>(), parse_sim_hex(&c[3], width), parse_sim_hex(&c[4], width)) else {
                return SimReport::malformed(ds, format!("unreadable MISMATCH line `{line}`"));
            };
            let Logic::Known(expected) = exp else {
                return SimReport::malformed(ds, format!("MISMATCH with unknown expected value `{line}`"));
            };
            if obs == Logic::Known(expected) {
                return SimReport::malformed(ds, format!("MISMATCH reports equal values `{line}`"));
            }
            ds.push(Discrepancy {
                cycle,
                signal: c[2].to_string(),
                expected,
                observed: obs,
            });
        } else if let Some(c) = RESULT.captures(line) {
            let Ok(n) = c[2].parse::<u64>() else {
                return SimReport::malformed(ds, format!("unreadable RESULT line `{line}`"));
            };
            results.push((&c[1] == "pass", n));
        }
    }
    match results.as_slice() {
        [] => SimReport::malformed(ds, "no RESULT line; the simulation did not finish normally".into()),
        [(true, 0)] if ds.is_empty() => SimReport {
            discrepancies: ds,
            verdict: Verdict::Pass,
            problem: None,
        },
        [(false, n)] if *n > 0 && *n == ds.len() as u64 => SimReport {
            discrepancies: ds,
            verdict: Verdict::Fail,
            problem: None,
        },
        [_] => {
            let n = ds.len();
            SimReport::malformed(ds, format!("RESULT line contradicts {n} MISMATCH lines"))
        }
        _ => SimReport::malformed(ds, format!("{} RESULT lines", results.len())),
    }
}

/// Renders discrepancies exactly as the synthesized testbench prints them.
pub fn compose_sim_output(discrepancies: &[Discrepancy]) -> String {
    let mut s = String::new();
    for d in discrepancies {
        let _ = writeln!(
            s,
            "MISMATCH cycle={} signal={} expected={} observed={}",
            d.cycle,
            d.signal,
            d.expected.to_sim_hex(),
            d.observed.to_sim_hex()
        );
    }
    if discrepancies.is_empty() {
        s.push_str("RESULT pass mismatches=0\n");
    } else {
        let _ = writeln!(s, "RESULT fail mismatches={}", discrepancies.len());
    }
    s
}
