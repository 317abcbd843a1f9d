//! Engines against exhaustive enumeration, and models over full
//! interpretations against least models.

mod common;

use prefail::abduce;
use prefail::constraint;
use prefail::leastmodel::query_fails;
use prefail::oracle::{enumerate_interpretations, enumerate_preinterps, space_size, EnumerationOptions, DEFAULT_CAP};
use prefail::search::{Outcome, SearchOptions};
use prefail::solvers::SolverKind;

/// Failing pre-interpretations of odd_even over two elements, counted by a
/// hand-written fixpoint for `even(0). even(s(X)) :- odd(X). odd(s(X)) :- even(X).`
fn odd_even_failing_by_hand() -> u64 {
    let mut failing = 0;
    for zero in 0..2usize {
        for s0 in 0..2usize {
            for s1 in 0..2usize {
                let s = [s0, s1];
                let (mut even, mut odd) = ([false; 2], [false; 2]);
                even[zero] = true;
                loop {
                    let (e, o) = (even, odd);
                    for x in 0..2 {
                        even[s[x]] |= odd[x];
                        odd[s[x]] |= even[x];
                    }
                    if (e, o) == (even, odd) {
                        break;
                    }
                }
                if !(0..2).any(|x| even[x] && even[s[x]]) {
                    failing += 1;
                }
            }
        }
    }
    failing
}

#[test]
fn odd_even_space_and_failing_count() {
    let l = common::load("odd_even");
    assert_eq!(space_size(&l.ap.arities(), 2), Some(8));
    let rep = enumerate_preinterps(&l.ap, 2, EnumerationOptions::default()).unwrap();
    assert_eq!(rep.space_size, 8);
    assert_eq!(rep.failing, odd_even_failing_by_hand());
    assert_eq!(rep.failing, 2);
    // both failing tables swap the elements; they differ only by renaming
    assert_eq!(rep.iso_classes, Some(1));
    assert!(common::isomorphic(&rep.witnesses[0], &rep.witnesses[1]));
}

#[test]
fn enumeration_witnesses_fail_the_query() {
    for (stem, n) in [("odd_even", 2), ("wicked_oe", 2), ("multiseto", 2), ("multisetl", 2)] {
        let l = common::load(stem);
        let rep = enumerate_preinterps(&l.ap, n, EnumerationOptions::default()).unwrap();
        assert!(rep.failing as usize >= rep.witnesses.len());
        for j in &rep.witnesses {
            assert!(j.is_total() && query_fails(&l.ap, j), "{stem}");
        }
    }
}

#[test]
fn engine_verdicts_match_enumeration() {
    let cases = [
        ("odd_even", 2),
        ("wicked_oe", 2),
        ("multiseto", 2),
        ("multisetl", 2),
        ("odd_even", 3),
        ("appendlast", 3),
        ("odd_even", 1),
        ("appendlast", 2),
        ("less", 2),
        ("less", 3),
    ];
    for (stem, n) in cases {
        let l = common::load(stem);
        let opts = EnumerationOptions { cap: DEFAULT_CAP, count_only: true, max_witnesses: 0 };
        let oracle = enumerate_preinterps(&l.ap, n, opts).unwrap().failing > 0;
        let so = SearchOptions::default();
        let results = [
            ("abduce", abduce::solve(&l.ap, n, &so).outcome),
            ("abductive", constraint::solve(&l.ap, n, &so, SolverKind::Abductive).unwrap().outcome),
            ("fd", constraint::solve(&l.ap, n, &so, SolverKind::Fd).unwrap().outcome),
        ];
        for (engine, outcome) in results {
            match outcome {
                Outcome::Solution(j) => {
                    assert!(oracle, "{stem} n={n}: {engine} found a solution the oracle denies");
                    assert!(query_fails(&l.ap, &j.completed()), "{stem} n={n}: {engine} witness does not fail");
                }
                Outcome::Exhausted => assert!(!oracle, "{stem} n={n}: {engine} missed a failing pre-interpretation"),
                Outcome::Timeout => unreachable!(),
            }
        }
    }
}

#[test]
fn a_falsifying_model_exists_exactly_when_the_least_model_falsifies() {
    for stem in ["odd_even", "multiseto", "multisetl"] {
        let l = common::load(stem);
        let checks = enumerate_interpretations(&l.program, &l.query, &l.ap, 2, DEFAULT_CAP).unwrap();
        assert_eq!(checks.len() as u128, space_size(&l.ap.arities(), 2).unwrap());
        assert!(checks.iter().all(|c| c.consistent()), "{stem}");
        // not vacuous: both outcomes occur
        assert!(checks.iter().any(|c| c.models > 0), "{stem}");
        assert!(checks.iter().any(|c| c.models == 0), "{stem}");
    }
}
