//! Ground encoding of constraints on the unknown pre-interpretation.
//!
//! A constraint over abducibles is compiled into a negation-normal-form
//! formula whose atoms are equalities between ground terms built from
//! functors and domain elements; a ground term `f(t1, .., tk)` denotes
//! `J(f)(J(t1), .., J(tk))`. Variables defined by an abducible become the
//! corresponding term; the remaining variables are expanded over the domain.

use std::collections::HashMap;

use smallvec::SmallVec;
use thiserror::Error;

use crate::clause::{Arg, EClause, Lit};
use crate::preinterp::{tuple_at, Elem};
use crate::syntax::{FunctorId, Symbols};

pub type TermId = u32;
pub type NodeId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GTerm {
    Elem(Elem),
    App(FunctorId, SmallVec<[TermId; 3]>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Node {
    True,
    False,
    Eq(TermId, TermId),
    Neq(TermId, TermId),
    /// Children are `kids[start..start + len]`.
    And(u32, u32),
    Or(u32, u32),
}

pub const TRUE: NodeId = 0;
pub const FALSE: NodeId = 1;

/// Default bound on the number of formula nodes a single constraint may create.
pub const DEFAULT_NODE_CAP: usize = 4_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodingError {
    #[error("constraint not encodable: its ground expansion exceeds {0} formula nodes")]
    ConstraintNotEncodable(usize),
}

/// Append-only store of ground terms and formula nodes.
#[derive(Debug, Clone)]
pub struct Arena {
    terms: Vec<GTerm>,
    index: HashMap<GTerm, TermId>,
    nodes: Vec<Node>,
    kids: Vec<NodeId>,
    node_cap: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct ArenaMark {
    terms: usize,
    nodes: usize,
    kids: usize,
}

impl Default for Arena {
    fn default() -> Self {
        Self::new(DEFAULT_NODE_CAP)
    }
}

impl Arena {
    pub fn new(node_cap: usize) -> Self {
        Arena { terms: Vec::new(), index: HashMap::new(), nodes: vec![Node::True, Node::False], kids: Vec::new(), node_cap }
    }

    pub fn mark(&self) -> ArenaMark {
        ArenaMark { terms: self.terms.len(), nodes: self.nodes.len(), kids: self.kids.len() }
    }

    pub fn truncate(&mut self, m: ArenaMark) {
        for t in self.terms.drain(m.terms..) {
            self.index.remove(&t);
        }
        self.nodes.truncate(m.nodes);
        self.kids.truncate(m.kids);
    }

    pub fn term(&self, t: TermId) -> &GTerm {
        &self.terms[t as usize]
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> Node {
        self.nodes[id as usize]
    }

    pub fn kids(&self, start: u32, len: u32) -> &[NodeId] {
        &self.kids[start as usize..(start + len) as usize]
    }

    pub fn intern(&mut self, t: GTerm) -> TermId {
        if let Some(&id) = self.index.get(&t) {
            return id;
        }
        let id = self.terms.len() as TermId;
        self.terms.push(t.clone());
        self.index.insert(t, id);
        id
    }

    pub fn elem(&mut self, e: Elem) -> TermId {
        self.intern(GTerm::Elem(e))
    }

    pub fn app(&mut self, f: FunctorId, args: &[TermId]) -> TermId {
        self.intern(GTerm::App(f, SmallVec::from_slice(args)))
    }

    fn push(&mut self, n: Node) -> NodeId {
        self.nodes.push(n);
        (self.nodes.len() - 1) as NodeId
    }

    pub fn eq(&mut self, a: TermId, b: TermId) -> NodeId {
        if a == b {
            return TRUE;
        }
        if let (GTerm::Elem(_), GTerm::Elem(_)) = (self.term(a), self.term(b)) {
            return FALSE;
        }
        self.push(Node::Eq(a.min(b), a.max(b)))
    }

    pub fn neq(&mut self, a: TermId, b: TermId) -> NodeId {
        if a == b {
            return FALSE;
        }
        if let (GTerm::Elem(_), GTerm::Elem(_)) = (self.term(a), self.term(b)) {
            return TRUE;
        }
        self.push(Node::Neq(a.min(b), a.max(b)))
    }

    fn junction(&mut self, children: Vec<NodeId>, and: bool) -> NodeId {
        let (unit, zero) = if and { (TRUE, FALSE) } else { (FALSE, TRUE) };
        let mut flat = Vec::with_capacity(children.len());
        for c in children {
            if c == zero {
                return zero;
            }
            if c == unit {
                continue;
            }
            match (self.node(c), and) {
                (Node::And(s, l), true) | (Node::Or(s, l), false) => flat.extend_from_slice(self.kids(s, l)),
                _ => flat.push(c),
            }
        }
        flat.sort_unstable();
        flat.dedup();
        match flat.len() {
            0 => unit,
            1 => flat[0],
            len => {
                let start = self.kids.len() as u32;
                self.kids.extend_from_slice(&flat);
                self.push(if and { Node::And(start, len as u32) } else { Node::Or(start, len as u32) })
            }
        }
    }

    pub fn and(&mut self, children: Vec<NodeId>) -> NodeId {
        self.junction(children, true)
    }

    pub fn or(&mut self, children: Vec<NodeId>) -> NodeId {
        self.junction(children, false)
    }

    pub fn render_term(&self, t: TermId, symbols: &Symbols) -> String {
        match self.term(t) {
            GTerm::Elem(e) => e.to_string(),
            GTerm::App(f, args) => {
                let name = &symbols.functor_symbol(*f).name;
                if args.is_empty() {
                    name.clone()
                } else {
                    let a: Vec<String> = args.iter().map(|&x| self.render_term(x, symbols)).collect();
                    format!("{name}({})", a.join(","))
                }
            }
        }
    }

    pub fn render(&self, id: NodeId, symbols: &Symbols) -> String {
        match self.node(id) {
            Node::True => "true".into(),
            Node::False => "false".into(),
            Node::Eq(a, b) => format!("{} = {}", self.render_term(a, symbols), self.render_term(b, symbols)),
            Node::Neq(a, b) => format!("{} != {}", self.render_term(a, symbols), self.render_term(b, symbols)),
            Node::And(s, l) | Node::Or(s, l) => {
                let sep = if matches!(self.node(id), Node::And(..)) { " & " } else { " | " };
                let parts: Vec<String> = self.kids(s, l).iter().map(|&k| self.render(k, symbols)).collect();
                format!("({})", parts.join(sep))
            }
        }
    }
}

/// How the variables of a conjunction of abducibles get their values.
#[derive(Debug, Clone)]
struct Analysis {
    /// Variables expanded over the domain.
    free: Vec<u16>,
    /// `(var, literal)` in dependency order: `var` is the output of `literal`.
    defs: Vec<(u16, usize)>,
    /// Abducibles that are conditions rather than definitions.
    conds: Vec<usize>,
}

fn analyze(body: &[Lit], nvars: u16, prebound: &[bool]) -> Analysis {
    let mut known: Vec<bool> = (0..nvars as usize).map(|v| prebound.get(v).copied().unwrap_or(false)).collect();
    let mut used = vec![false; body.len()];
    let mut free = Vec::new();
    let mut defs = Vec::new();
    let var = |a: &Arg| match a {
        Arg::Var(v) => Some(*v),
        Arg::Val(_) => None,
    };
    loop {
        let mut progress = false;
        for (i, l) in body.iter().enumerate() {
            let Lit::Abd(_, args) = l else { continue };
            if used[i] {
                continue;
            }
            let (inputs, out) = args.split_at(args.len() - 1);
            let inputs_known = inputs.iter().all(|a| var(a).is_none_or(|v| known[v as usize]));
            if let Some(o) = var(&out[0]) {
                if inputs_known && !known[o as usize] {
                    known[o as usize] = true;
                    used[i] = true;
                    defs.push((o, i));
                    progress = true;
                }
            }
        }
        if progress {
            continue;
        }
        // Expand the first unknown variable that is an input somewhere (or
        // any unknown variable if none is).
        let mut pick = None;
        'outer: for l in body {
            let Lit::Abd(_, args) = l else { continue };
            for a in &args[..args.len() - 1] {
                if let Some(v) = var(a) {
                    if !known[v as usize] {
                        pick = Some(v);
                        break 'outer;
                    }
                }
            }
        }
        let pick = pick.or_else(|| (0..nvars).find(|&v| !known[v as usize]));
        match pick {
            Some(v) => {
                known[v as usize] = true;
                free.push(v);
            }
            None => break,
        }
    }
    let conds = (0..body.len()).filter(|&i| !used[i] && matches!(body[i], Lit::Abd(..))).collect();
    Analysis { free, defs, conds }
}

/// One ground instance of a conjunction of abducibles: the term of every
/// variable and the equations `f(inputs) = output` that must hold.
struct Instance {
    terms: Vec<TermId>,
    conds: Vec<(TermId, TermId)>,
}

fn instances(
    arena: &mut Arena,
    body: &[Lit],
    nvars: u16,
    n: usize,
    prebound: &[Option<TermId>],
    budget: &mut usize,
) -> Result<Vec<Instance>, EncodingError> {
    let pre: Vec<bool> = prebound.iter().map(Option::is_some).collect();
    let an = analyze(body, nvars, &pre);
    let count = n.checked_pow(an.free.len() as u32).unwrap_or(usize::MAX);
    if count > *budget {
        return Err(EncodingError::ConstraintNotEncodable(arena.node_cap));
    }
    *budget -= count;
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        let sigma = tuple_at(idx, an.free.len(), n);
        let mut terms = vec![u32::MAX; nvars as usize];
        for (v, t) in prebound.iter().enumerate() {
            if let Some(t) = t {
                terms[v] = *t;
            }
        }
        for (&v, &e) in an.free.iter().zip(&sigma) {
            terms[v as usize] = arena.elem(e);
        }
        let term_of = |arena: &mut Arena, terms: &[TermId], a: &Arg| match a {
            Arg::Var(v) => terms[*v as usize],
            Arg::Val(e) => arena.elem(*e),
        };
        for &(v, li) in &an.defs {
            let Lit::Abd(f, args) = &body[li] else { unreachable!() };
            let ins: SmallVec<[TermId; 3]> = args[..args.len() - 1].iter().map(|a| term_of(arena, &terms, a)).collect();
            terms[v as usize] = arena.app(*f, &ins);
        }
        let mut conds = Vec::with_capacity(an.conds.len());
        for &li in &an.conds {
            let Lit::Abd(f, args) = &body[li] else { unreachable!() };
            let ins: SmallVec<[TermId; 3]> = args[..args.len() - 1].iter().map(|a| term_of(arena, &terms, a)).collect();
            let lhs = arena.app(*f, &ins);
            let rhs = term_of(arena, &terms, args.last().unwrap());
            conds.push((lhs, rhs));
        }
        out.push(Instance { terms, conds });
    }
    Ok(out)
}

fn check_cap(arena: &Arena, start: usize) -> Result<(), EncodingError> {
    if arena.nodes.len() - start > arena.node_cap {
        Err(EncodingError::ConstraintNotEncodable(arena.node_cap))
    } else {
        Ok(())
    }
}

/// `false <- body`: no instance of the abducibles may hold.
pub fn falsity(arena: &mut Arena, clause: &EClause, n: usize) -> Result<NodeId, EncodingError> {
    let start = arena.nodes.len();
    let mut budget = arena.node_cap;
    let insts = instances(arena, &clause.body, clause.nvars, n, &[], &mut budget)?;
    let mut conj = Vec::with_capacity(insts.len());
    for inst in insts {
        let d: Vec<NodeId> = inst.conds.iter().map(|&(a, b)| arena.neq(a, b)).collect();
        conj.push(arena.or(d));
        check_cap(arena, start)?;
    }
    Ok(arena.and(conj))
}

fn head_terms(clause: &EClause, inst: &Instance, arena: &mut Arena) -> Vec<TermId> {
    clause
        .head_args()
        .iter()
        .map(|a| match a {
            Arg::Var(v) => inst.terms[*v as usize],
            Arg::Val(e) => arena.elem(*e),
        })
        .collect()
}

/// Ways for `answer` to cover the head `head`: one conjunction of equations
/// per instance. Answer head variables are bound to the covered terms.
fn coverings(
    arena: &mut Arena,
    answer: &EClause,
    head: &[TermId],
    n: usize,
    budget: &mut usize,
) -> Result<Vec<Vec<(TermId, TermId)>>, EncodingError> {
    let mut prebound: Vec<Option<TermId>> = vec![None; answer.nvars as usize];
    let mut extra = Vec::new();
    for (a, &t) in answer.head_args().iter().zip(head) {
        match a {
            Arg::Var(v) => match prebound[*v as usize] {
                None => prebound[*v as usize] = Some(t),
                Some(u) => extra.push((u, t)),
            },
            Arg::Val(e) => {
                let et = arena.elem(*e);
                extra.push((et, t));
            }
        }
    }
    let insts = instances(arena, &answer.body, answer.nvars, n, &prebound, budget)?;
    Ok(insts
        .into_iter()
        .map(|inst| {
            let mut eqs = inst.conds;
            eqs.extend_from_slice(&extra);
            eqs
        })
        .collect())
}

/// `fact` is subsumed by `answers`: every instance of the fact whose
/// abducibles hold has a head covered by some instance of some answer.
pub fn subsumed(arena: &mut Arena, fact: &EClause, answers: &[EClause], n: usize) -> Result<NodeId, EncodingError> {
    let start = arena.nodes.len();
    let mut budget = arena.node_cap;
    let insts = instances(arena, &fact.body, fact.nvars, n, &[], &mut budget)?;
    let mut conj = Vec::with_capacity(insts.len());
    for inst in &insts {
        let head = head_terms(fact, inst, arena);
        let mut disj: Vec<NodeId> = inst.conds.iter().map(|&(a, b)| arena.neq(a, b)).collect();
        for ans in answers {
            for eqs in coverings(arena, ans, &head, n, &mut budget)? {
                let c: Vec<NodeId> = eqs.iter().map(|&(a, b)| arena.eq(a, b)).collect();
                disj.push(arena.and(c));
            }
            check_cap(arena, start)?;
        }
        conj.push(arena.or(disj));
    }
    Ok(arena.and(conj))
}

/// Negation of [`subsumed`]: some instance of the fact holds and its head is
/// covered by no instance of any answer.
pub fn not_subsumed(arena: &mut Arena, fact: &EClause, answers: &[EClause], n: usize) -> Result<NodeId, EncodingError> {
    let start = arena.nodes.len();
    let mut budget = arena.node_cap;
    let insts = instances(arena, &fact.body, fact.nvars, n, &[], &mut budget)?;
    let mut disj = Vec::with_capacity(insts.len());
    for inst in &insts {
        let head = head_terms(fact, inst, arena);
        let mut conj: Vec<NodeId> = inst.conds.iter().map(|&(a, b)| arena.eq(a, b)).collect();
        for ans in answers {
            for eqs in coverings(arena, ans, &head, n, &mut budget)? {
                let d: Vec<NodeId> = eqs.iter().map(|&(a, b)| arena.neq(a, b)).collect();
                conj.push(arena.or(d));
            }
            check_cap(arena, start)?;
        }
        disj.push(arena.and(conj));
    }
    Ok(arena.or(disj))
}

/// Evaluates a formula under a total function table (test oracle).
pub fn holds(arena: &Arena, id: NodeId, j: &crate::preinterp::PreInterpretation) -> bool {
    fn val(arena: &Arena, t: TermId, j: &crate::preinterp::PreInterpretation) -> Elem {
        match arena.term(t) {
            GTerm::Elem(e) => *e,
            GTerm::App(f, args) => {
                let ins: SmallVec<[Elem; 4]> = args.iter().map(|&a| val(arena, a, j)).collect();
                j.get(*f, &ins).expect("holds() needs a total pre-interpretation")
            }
        }
    }
    match arena.node(id) {
        Node::True => true,
        Node::False => false,
        Node::Eq(a, b) => val(arena, a, j) == val(arena, b, j),
        Node::Neq(a, b) => val(arena, a, j) != val(arena, b, j),
        Node::And(s, l) => arena.kids(s, l).iter().all(|&k| holds(arena, k, j)),
        Node::Or(s, l) => arena.kids(s, l).iter().any(|&k| holds(arena, k, j)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clause::Head;
    use crate::preinterp::PreInterpretation;
    use crate::syntax::PredId;
    use smallvec::smallvec;

    const ZERO: FunctorId = FunctorId(0);
    const S: FunctorId = FunctorId(1);

    fn v(i: u16) -> Arg {
        Arg::Var(i)
    }

    fn parity(s0: u8, s1: u8, zero: u8) -> PreInterpretation {
        let mut j = PreInterpretation::new(2, vec![0, 1]);
        j.set(ZERO, &[], Elem(zero));
        j.set(S, &[Elem(0)], Elem(s0));
        j.set(S, &[Elem(1)], Elem(s1));
        j
    }

    #[test]
    fn falsity_of_defining_abducibles_is_false() {
        let mut a = Arena::default();
        // false <- p_zero(X0), p_s(X0, X1)
        let c = EClause {
            head: Head::False,
            body: vec![Lit::Abd(ZERO, smallvec![v(0)]), Lit::Abd(S, smallvec![v(0), v(1)])],
            nvars: 2,
        };
        assert_eq!(falsity(&mut a, &c, 2).unwrap(), FALSE);
    }

    #[test]
    fn falsity_with_a_condition() {
        let mut a = Arena::default();
        // false <- p_zero(X0), p_s(X0, X0): s(zero) != zero
        let c = EClause {
            head: Head::False,
            body: vec![Lit::Abd(ZERO, smallvec![v(0)]), Lit::Abd(S, smallvec![v(0), v(0)])],
            nvars: 1,
        };
        let f = falsity(&mut a, &c, 2).unwrap();
        assert!(holds(&a, f, &parity(1, 0, 0)));
        assert!(!holds(&a, f, &parity(0, 0, 0)));
    }

    #[test]
    fn subsumption_semantics() {
        let mut a = Arena::default();
        let p = PredId(0);
        // answer even(X0) <- p_zero(X0); fact even(X0) <- p_s(X1,X0), p_s(X2,X1), p_zero(X2)
        let ans = EClause { head: Head::Atom(p, smallvec![v(0)]), body: vec![Lit::Abd(ZERO, smallvec![v(0)])], nvars: 1 };
        let fact = EClause {
            head: Head::Atom(p, smallvec![v(0)]),
            body: vec![
                Lit::Abd(S, smallvec![v(1), v(0)]),
                Lit::Abd(S, smallvec![v(2), v(1)]),
                Lit::Abd(ZERO, smallvec![v(2)]),
            ],
            nvars: 3,
        };
        let sub = subsumed(&mut a, &fact, std::slice::from_ref(&ans), 2).unwrap();
        let not = not_subsumed(&mut a, &fact, std::slice::from_ref(&ans), 2).unwrap();
        for idx in 0..8u128 {
            let j = PreInterpretation::from_index(2, vec![0, 1], idx);
            let zero = j.get(ZERO, &[]).unwrap();
            let ss = j.get(S, &[j.get(S, &[zero]).unwrap()]).unwrap();
            assert_eq!(holds(&a, sub, &j), ss == zero, "J index {idx}");
            assert_eq!(holds(&a, not, &j), ss != zero);
        }
    }

    #[test]
    fn arena_truncation_forgets_terms() {
        let mut a = Arena::default();
        let m = a.mark();
        let d0 = a.elem(Elem(0));
        let t = a.app(S, &[d0]);
        assert_eq!(a.num_terms(), 2);
        a.truncate(m);
        assert_eq!(a.num_terms(), 0);
        let d0 = a.elem(Elem(0));
        assert_eq!(a.app(S, &[d0]), t);
    }
}
