//! Constraint stores: the encodings of falsity and subsumption constraints,
//! and the two consistency solvers against brute force.

mod common;

use prefail::clause::{Arg, EClause, Head, Lit};
use prefail::encoding::{falsity, holds, subsumed, Arena, Node, NodeId, TermId};
use prefail::preinterp::{all_tuples, Elem, PreInterpretation};
use prefail::solvers::{Backend, SolverKind};
use prefail::syntax::FunctorId;
use proptest::prelude::*;
use smallvec::smallvec;

fn abd(f: FunctorId, args: &[u16]) -> Lit {
    Lit::Abd(f, args.iter().map(|&v| Arg::Var(v)).collect())
}

/// Every total table over `n` elements.
fn all_tables(n: usize, arities: &[usize]) -> Vec<PreInterpretation> {
    let cells: u32 = arities.iter().map(|&k| n.pow(k as u32) as u32).sum();
    (0..(n as u128).pow(cells)).map(|i| PreInterpretation::from_index(n, arities.to_vec(), i)).collect()
}

fn backends(n: usize, arities: &[usize]) -> Vec<(String, Backend)> {
    let mut out = Vec::new();
    for ib in [true, false] {
        for sym in [true, false] {
            out.push((format!("abductive ib={ib} sym={sym}"), Backend::new(SolverKind::Abductive, n, arities.to_vec(), ib, sym)));
        }
    }
    out.push(("fd".into(), Backend::new(SolverKind::Fd, n, arities.to_vec(), true, true)));
    out
}

struct EvenOdd {
    l: common::Loaded,
    zero: FunctorId,
    s: FunctorId,
}

fn even_odd() -> EvenOdd {
    let l = common::load("even_odd");
    let zero = l.ap.symbols.lookup_functor("0", 0).expect("functor 0");
    let s = l.ap.symbols.lookup_functor("s", 1).expect("functor s");
    EvenOdd { l, zero, s }
}

impl EvenOdd {
    /// `false <- ab(0,X), ab(s(0),X)`
    fn falsity(&self, a: &mut Arena) -> NodeId {
        let c = EClause { head: Head::False, body: vec![abd(self.zero, &[0]), abd(self.s, &[0, 0])], nvars: 1 };
        falsity(a, &c, 2).unwrap()
    }

    /// `subsumed(even(Y) <- ab(s(s(0)),Y), {even(X) <- ab(0,X)})`
    fn subsumed(&self, a: &mut Arena) -> NodeId {
        let even = self.l.ap.symbols.lookup_pred("even", 1).unwrap();
        let fact = EClause {
            head: Head::Atom(even, smallvec![Arg::Var(2)]),
            body: vec![abd(self.zero, &[0]), abd(self.s, &[0, 1]), abd(self.s, &[1, 2])],
            nvars: 3,
        };
        let answer = EClause { head: Head::Atom(even, smallvec![Arg::Var(0)]), body: vec![abd(self.zero, &[0])], nvars: 1 };
        subsumed(a, &fact, &[answer], 2).unwrap()
    }

    fn val(&self, j: &PreInterpretation, depth: usize) -> Elem {
        let mut v = j.get(self.zero, &[]).unwrap();
        for _ in 0..depth {
            v = j.get(self.s, &[v]).unwrap();
        }
        v
    }
}

fn term_text(a: &Arena, t: TermId, e: &EvenOdd) -> String {
    a.render_term(t, &e.l.ap.symbols)
}

#[test]
fn falsity_encodes_a_disequation() {
    let e = even_odd();
    let mut a = Arena::default();
    let f = e.falsity(&mut a);
    let Node::Neq(x, y) = a.node(f) else { panic!("{}", a.render(f, &e.l.ap.symbols)) };
    let mut sides = [term_text(&a, x, &e), term_text(&a, y, &e)];
    sides.sort();
    assert_eq!(sides, ["0", "s(0)"]);
    for j in all_tables(2, &e.l.ap.arities()) {
        assert_eq!(holds(&a, f, &j), e.val(&j, 0) != e.val(&j, 1));
    }
}

#[test]
fn subsumption_encodes_an_equation() {
    let e = even_odd();
    let mut a = Arena::default();
    let s = e.subsumed(&mut a);
    let Node::Eq(x, y) = a.node(s) else { panic!("{}", a.render(s, &e.l.ap.symbols)) };
    let mut sides = [term_text(&a, x, &e), term_text(&a, y, &e)];
    sides.sort();
    assert_eq!(sides, ["0", "s(s(0))"]);
    for j in all_tables(2, &e.l.ap.arities()) {
        assert_eq!(holds(&a, s, &j), e.val(&j, 2) == e.val(&j, 0));
    }
}

#[test]
fn even_odd_store_is_consistent_with_both_solvers() {
    let e = even_odd();
    let mut a = Arena::default();
    let roots = [e.falsity(&mut a), e.subsumed(&mut a)];
    let arities = e.l.ap.arities();
    for (name, mut b) in backends(2, &arities) {
        for &r in &roots {
            b.post(r);
        }
        assert!(b.check(&a, None).unwrap().0, "{name}");
        let j = b.witness(2, &arities).completed();
        assert!(roots.iter().all(|&r| holds(&a, r, &j)), "{name}");
        // the only way: 0 and s(0) differ, s swaps them
        assert_ne!(e.val(&j, 0), e.val(&j, 1), "{name}");
        assert_eq!(e.val(&j, 0), e.val(&j, 2), "{name}");
    }
}

#[test]
fn empty_falsity_is_inconsistent() {
    let mut a = Arena::default();
    let f = falsity(&mut a, &EClause { head: Head::False, body: vec![], nvars: 0 }, 2).unwrap();
    for (name, mut b) in backends(2, &[0, 1]) {
        b.post(f);
        assert!(!b.check(&a, None).unwrap().0, "{name}");
    }
}

#[test]
fn empty_store_is_consistent_at_size_one() {
    let a = Arena::default();
    for (name, mut b) in backends(1, &[0, 1, 2]) {
        assert!(b.check(&a, None).unwrap().0, "{name}");
        let j = b.witness(1, &[0, 1, 2]).completed();
        for f in 0..3u32 {
            let k = [0, 1, 2][f as usize];
            for t in all_tuples(k, 1) {
                assert_eq!(j.get(FunctorId(f), &t), Some(Elem(0)));
            }
        }
    }
}

// Random stores over ground terms without domain constants: such stores are
// closed under renaming the domain, which the abductive solver's value
// ordering relies on.

#[derive(Debug, Clone)]
enum T {
    C(u32),
    F(Box<T>),
    G(Box<T>, Box<T>),
}

#[derive(Debug, Clone)]
enum F {
    Eq(T, T),
    Neq(T, T),
    And(Vec<F>),
    Or(Vec<F>),
}

/// Functors: two constants, unary 2, binary 3 (when `binary`).
fn term(binary: bool) -> impl Strategy<Value = T> {
    (0..2u32).prop_map(T::C).prop_recursive(3, 12, 2, move |inner| {
        if binary {
            prop_oneof![
                inner.clone().prop_map(|t| T::F(Box::new(t))),
                (inner.clone(), inner).prop_map(|(a, b)| T::G(Box::new(a), Box::new(b))),
            ]
            .boxed()
        } else {
            inner.prop_map(|t| T::F(Box::new(t))).boxed()
        }
    })
}

fn formula(binary: bool) -> impl Strategy<Value = F> {
    let leaf = prop_oneof![
        (term(binary), term(binary)).prop_map(|(a, b)| F::Eq(a, b)),
        (term(binary), term(binary)).prop_map(|(a, b)| F::Neq(a, b)),
    ];
    leaf.prop_recursive(2, 12, 3, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 1..4).prop_map(F::And),
            proptest::collection::vec(inner, 1..4).prop_map(F::Or),
        ]
    })
}

fn build_term(a: &mut Arena, t: &T) -> TermId {
    match t {
        T::C(c) => a.app(FunctorId(*c), &[]),
        T::F(x) => {
            let x = build_term(a, x);
            a.app(FunctorId(2), &[x])
        }
        T::G(x, y) => {
            let (x, y) = (build_term(a, x), build_term(a, y));
            a.app(FunctorId(3), &[x, y])
        }
    }
}

fn build(a: &mut Arena, f: &F) -> NodeId {
    match f {
        F::Eq(x, y) => {
            let (x, y) = (build_term(a, x), build_term(a, y));
            a.eq(x, y)
        }
        F::Neq(x, y) => {
            let (x, y) = (build_term(a, x), build_term(a, y));
            a.neq(x, y)
        }
        F::And(fs) => {
            let k = fs.iter().map(|f| build(a, f)).collect();
            a.and(k)
        }
        F::Or(fs) => {
            let k = fs.iter().map(|f| build(a, f)).collect();
            a.or(k)
        }
    }
}

fn agree_with_brute_force(n: usize, arities: &[usize], store: &[F]) -> Result<(), TestCaseError> {
    let mut a = Arena::default();
    let roots: Vec<NodeId> = store.iter().map(|f| build(&mut a, f)).collect();
    let sat = all_tables(n, arities).iter().any(|j| roots.iter().all(|&r| holds(&a, r, j)));
    for (name, mut b) in backends(n, arities) {
        // incremental posting, checking after every post
        let mut consistent = true;
        for &r in &roots {
            b.post(r);
            consistent = b.check(&a, None).unwrap().0;
            if !consistent {
                break;
            }
        }
        prop_assert_eq!(consistent, sat, "{}", name);
        if consistent {
            let j = b.witness(n, arities).completed();
            prop_assert!(roots.iter().all(|&r| holds(&a, r, &j)), "{} witness violates the store", name);
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn solvers_agree_with_brute_force_over_two_elements(store in proptest::collection::vec(formula(true), 1..6)) {
        agree_with_brute_force(2, &[0, 0, 1, 2], &store)?;
    }

    #[test]
    fn solvers_agree_with_brute_force_over_three_elements(store in proptest::collection::vec(formula(false), 1..6)) {
        agree_with_brute_force(3, &[0, 0, 1], &store)?;
    }
}
