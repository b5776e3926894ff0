// SPDX-License-Identifier: Apache-2.0
//! Random discrepancy lists for the mismatch grammar.

use autoverifix::model::{BitVec, DesignKind, Discrepancy, Logic, PortDecl, ProblemSpec};
use proptest::prelude::*;

pub fn spec_with(outputs: &[(String, u32)]) -> ProblemSpec {
    let mut ports = vec![PortDecl::data_in("a", 1)];
    ports.extend(outputs.iter().map(|(n, w)| PortDecl::data_out(n, *w)));
    ProblemSpec {
        id: "p".into(),
        description: "d".into(),
        module_name: "m".into(),
        ports,
        kind: DesignKind::Combinational,
        golden_testbench: None,
    }
}

pub fn mask(width: u32, v: u64) -> u64 {
    if width == 64 { v } else { v & ((1u64 << width) - 1) }
}

/// Raw material for one discrepancy: port pick, cycle, two values, and a
/// selector that makes observed X about a fifth of the time. Edge values
/// (all zeros, all ones) are weighted in.
pub fn raw() -> impl Strategy<Value = (usize, u32, u64, u64, u8)> {
    let v = || prop_oneof![1 => Just(0u64), 1 => Just(u64::MAX), 6 => any::<u64>()];
    (any::<usize>(), any::<u32>(), v(), v(), 0u8..5)
}

pub fn build(ports: &[(String, u32)], (pick, cycle, e, o, x): (usize, u32, u64, u64, u8)) -> Discrepancy {
    let (name, width) = &ports[pick % ports.len()];
    let expected = BitVec::new(*width, mask(*width, e)).unwrap();
    let obs = BitVec::new(*width, mask(*width, o)).unwrap();
    let observed = if x == 0 {
        Logic::Unknown { width: *width }
    } else if obs == expected {
        Logic::Known(expected.flip_bit(0))
    } else {
        Logic::Known(obs)
    };
    Discrepancy { cycle: cycle as u64, signal: name.clone(), expected, observed }
}

pub fn ports() -> impl Strategy<Value = Vec<(String, u32)>> {
    proptest::collection::vec(1u32..=64, 1..5).prop_map(|ws| {
        ws.into_iter().enumerate().map(|(i, w)| (format!("o{i}_w{w}"), w)).collect()
    })
}

pub fn case() -> impl Strategy<Value = (Vec<(String, u32)>, Vec<Discrepancy>)> {
    (ports(), proptest::collection::vec(raw(), 0..12))
        .prop_map(|(ports, raws)| {
            let ds = raws.into_iter().map(|r| build(&ports, r)).collect();
            (ports, ds)
        })
}
