// SPDX-License-Identifier: Apache-2.0
//! pass@k and FPR against independent oracles.

use autoverifix::eval::{fpr, pass_at_k, ProblemResult, Stage1Summary};
use proptest::prelude::*;

/// Share of the k-subsets of n samples (the first c correct) that contain
/// a correct one, by enumerating bitmasks.
fn brute_force(n: u32, c: u32, k: u32) -> f64 {
    let correct_mask: u32 = (1u32 << c) - 1;
    let (mut hit, mut total) = (0u64, 0u64);
    for subset in 0u32..(1 << n) {
        if subset.count_ones() != k {
            continue;
        }
        total += 1;
        if subset & correct_mask != 0 {
            hit += 1;
        }
    }
    hit as f64 / total as f64
}

#[test]
fn matches_subset_enumeration() {
    let mut checked = 0;
    for n in 1..=10 {
        for c in 0..=n {
            for k in 1..=n {
                let got = pass_at_k(n, c, k).unwrap();
                let want = brute_force(n, c, k);
                assert!((got - want).abs() <= 1e-12, "n={n} c={c} k={k}: {got} vs {want}");
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 440);
}

#[test]
fn k1_is_exactly_the_fraction() {
    for n in 1..=300u32 {
        for c in 0..=n {
            assert_eq!(pass_at_k(n, c, 1).unwrap(), f64::from(c) / f64::from(n), "n={n} c={c}");
        }
    }
}

#[test]
fn domain_errors() {
    assert!(pass_at_k(5, 6, 1).is_err());
    assert!(pass_at_k(5, 2, 0).is_err());
    assert!(pass_at_k(5, 2, 6).is_err());
    assert!(pass_at_k(0, 0, 1).is_err());
}

fn row(samples: &[(bool, bool)]) -> ProblemResult {
    ProblemResult {
        problem_id: "p".into(),
        n: samples.len() as u32,
        c: samples.iter().filter(|s| s.1).count() as u32,
        c_tb: samples.iter().filter(|s| s.0).count() as u32,
        c_tb_correct: samples.iter().filter(|s| s.0 && s.1).count() as u32,
        stage1: Stage1Summary {
            status: "ok".into(),
            syntactic: true,
            functional: None,
            line_coverage: None,
        },
        sample_digests: Vec::new(),
        invalid: None,
        notes: Vec::new(),
    }
}

#[test]
fn fpr_examples() {
    let mut s = vec![(true, true); 9];
    s.push((true, false));
    assert!((fpr(&[row(&s)]).unwrap() - 0.10).abs() < 1e-12);
    assert_eq!(fpr(&[row(&[(true, true); 4])]), Some(0.0));
    assert_eq!(fpr(&[row(&[(false, true), (false, false)])]), None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn monotone_in_k_and_c(n in 1u32..=200, c_seed in 0u32..=200, k_seed in 1u32..=200) {
        let c = c_seed % (n + 1);
        let k = 1 + (k_seed - 1) % n;
        let p = pass_at_k(n, c, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        if k < n {
            prop_assert!(pass_at_k(n, c, k + 1).unwrap() >= p);
        }
        if c < n {
            prop_assert!(pass_at_k(n, c + 1, k).unwrap() >= p);
        }
    }

    #[test]
    fn fpr_bounds_and_perfect_filter(
        problems in proptest::collection::vec(proptest::collection::vec((any::<bool>(), any::<bool>()), 1..12), 1..6)
    ) {
        let rows: Vec<ProblemResult> = problems.iter().map(|s| row(s)).collect();
        if let Some(f) = fpr(&rows) {
            prop_assert!((0.0..=1.0).contains(&f));
        }
        // make every golden failure also a testbench failure
        let filtered: Vec<ProblemResult> = problems
            .iter()
            .map(|s| row(&s.iter().map(|&(tb, g)| (tb && g, g)).collect::<Vec<_>>()))
            .collect();
        let f = fpr(&filtered);
        prop_assert!(f.is_none() || f == Some(0.0));
    }
}
