//! The least model of the abstracted program, joined with the relational
//! form of a total pre-interpretation, agrees with the least model of the
//! original program computed by grounding.

mod common;

use prefail::leastmodel::{least_model, query_fails};
use prefail::oracle::direct_least_model;
use prefail::preinterp::{Elem, PreInterpretation};
use prefail::syntax::FunctorId;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

fn total(n: usize, arities: &[usize], cells: &[u8]) -> PreInterpretation {
    let mut j = PreInterpretation::new(n, arities.to_vec());
    let mut it = cells.iter();
    for (f, &k) in arities.iter().enumerate() {
        for i in 0..n.pow(k as u32) {
            j.set_index(FunctorId(f as u32), i, Some(Elem(*it.next().unwrap())));
        }
    }
    j
}

fn strategy(arities: Vec<usize>) -> impl Strategy<Value = PreInterpretation> {
    (1..=3usize).prop_flat_map(move |n| {
        let cells: usize = arities.iter().map(|&k| n.pow(k as u32)).sum();
        let arities = arities.clone();
        proptest::collection::vec(0..n as u8, cells).prop_map(move |c| total(n, &arities, &c))
    })
}

#[test]
fn abstracted_least_model_equals_direct_least_model() {
    for stem in common::CORPUS {
        let l = common::load(stem);
        let mut runner = TestRunner::new(Config { cases: 50, failure_persistence: None, ..Config::default() });
        runner
            .run(&strategy(l.ap.arities()), |j| {
                let direct = direct_least_model(&l.program, &l.query, &j);
                let abstracted = least_model(&l.ap, &j);
                prop_assert_eq!(direct.atoms(), abstracted.atoms(), "{} under {:?}", stem, j.render(&l.ap.symbols));
                Ok(())
            })
            .unwrap_or_else(|e| panic!("{stem}: {e}"));
    }
}

#[test]
fn query_failure_is_invariant_under_domain_permutation() {
    for stem in ["odd_even", "wicked_oe", "multisetl", "appendlast", "schedule"] {
        let l = common::load(stem);
        let mut runner = TestRunner::new(Config { cases: 30, failure_persistence: None, ..Config::default() });
        runner
            .run(&strategy(l.ap.arities()), |j| {
                let fails = query_fails(&l.ap, &j);
                for p in prefail::preinterp::Permutation::all(j.size()) {
                    prop_assert_eq!(query_fails(&l.ap, &j.apply_permutation(&p)), fails);
                }
                Ok(())
            })
            .unwrap_or_else(|e| panic!("{stem}: {e}"));
    }
}
