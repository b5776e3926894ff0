// SPDX-License-Identifier: Apache-2.0
//! Per-cycle simulation traces and output comparison.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bitvec::{BitVec, Logic};
use super::spec::ProblemSpec;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle_index: u64,
    pub inputs: BTreeMap<String, BitVec>,
    pub outputs: BTreeMap<String, Logic>,
    /// Internal model state; reference traces only, never compared.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimTrace {
    pub cycles: Vec<CycleRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("cycle {position} has index {found}, expected {position}")]
    BadIndex { position: usize, found: u64 },
    #[error("cycle {cycle}: port set mismatch ({detail})")]
    PortMismatch { cycle: u64, detail: String },
    #[error("cycle {cycle}: port `{port}` has width {found}, declared {declared}")]
    WidthMismatch {
        cycle: u64,
        port: String,
        found: u32,
        declared: u32,
    },
    #[error("observed trace has {observed} cycles, expected at least {expected}")]
    TooShort { expected: usize, observed: usize },
}

/// A functional mismatch on one output at one cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub cycle: u64,
    pub signal: String,
    pub expected: BitVec,
    pub observed: Logic,
}

impl SimTrace {
    pub fn new(cycles: Vec<CycleRecord>) -> Self {
        Self { cycles }
    }

    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    /// Checks indices and that every record binds exactly the spec's data ports.
    pub fn validate_against(&self, spec: &ProblemSpec) -> Result<(), TraceError> {
        let inputs: BTreeMap<&str, u32> = spec.inputs().map(|p| (p.name.as_str(), p.width)).collect();
        let outputs: BTreeMap<&str, u32> = spec.outputs().map(|p| (p.name.as_str(), p.width)).collect();
        for (pos, rec) in self.cycles.iter().enumerate() {
            if rec.cycle_index != pos as u64 {
                return Err(TraceError::BadIndex {
                    position: pos,
                    found: rec.cycle_index,
                });
            }
            let in_names: Vec<&str> = rec.inputs.keys().map(String::as_str).collect();
            let out_names: Vec<&str> = rec.outputs.keys().map(String::as_str).collect();
            if in_names != inputs.keys().copied().collect::<Vec<_>>() {
                return Err(TraceError::PortMismatch {
                    cycle: rec.cycle_index,
                    detail: format!("inputs {in_names:?} vs declared {:?}", inputs.keys()),
                });
            }
            if out_names != outputs.keys().copied().collect::<Vec<_>>() {
                return Err(TraceError::PortMismatch {
                    cycle: rec.cycle_index,
                    detail: format!("outputs {out_names:?} vs declared {:?}", outputs.keys()),
                });
            }
            let widths = rec
                .inputs
                .iter()
                .map(|(n, v)| (n, v.width(), inputs[n.as_str()]))
                .chain(rec.outputs.iter().map(|(n, v)| (n, v.width(), outputs[n.as_str()])));
            for (name, found, declared) in widths {
                if found != declared {
                    return Err(TraceError::WidthMismatch {
                        cycle: rec.cycle_index,
                        port: name.clone(),
                        found,
                        declared,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Lists every (cycle, output) cell where `observed` differs from `expected`.
///
/// Ordered by cycle, then signal name. Extra observed cycles are ignored and
/// the `state` field never participates.
pub fn compare_traces(expected: &SimTrace, observed: &SimTrace) -> Result<Vec<Discrepancy>, TraceError> {
    if observed.len() < expected.len() {
        return Err(TraceError::TooShort {
            expected: expected.len(),
            observed: observed.len(),
        });
    }
    let mut out = Vec::new();
    for (exp, obs) in expected.cycles.iter().zip(&observed.cycles) {
        if !exp.outputs.keys().eq(obs.outputs.keys()) {
            return Err(TraceError::PortMismatch {
                cycle: exp.cycle_index,
                detail: format!(
                    "expected outputs {:?}, observed {:?}",
                    exp.outputs.keys().collect::<Vec<_>>(),
                    obs.outputs.keys().collect::<Vec<_>>()
                ),
            });
        }
        // BTreeMap iteration gives name order within a cycle
        for ((name, want), got) in exp.outputs.iter().zip(obs.outputs.values()) {
            let Logic::Known(want_bits) = want else {
                // an X in the reference carries no expectation
                continue;
            };
            if *got != Logic::Known(*want_bits) {
                out.push(Discrepancy {
                    cycle: exp.cycle_index,
                    signal: name.clone(),
                    expected: *want_bits,
                    observed: *got,
                });
            }
        }
    }
    Ok(out)
}
