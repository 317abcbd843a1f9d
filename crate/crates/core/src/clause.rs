//! Function-free clauses as manipulated by the search engines: arguments are
//! clause-local variables or domain elements.

use std::fmt::Write as _;

use smallvec::SmallVec;

use crate::abstraction::{AbstractClause, AbstractQuery, Literal};
use crate::preinterp::{Elem, Tuple};
use crate::syntax::{FunctorId, PredId, Symbols};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arg {
    Var(u16),
    Val(Elem),
}

pub type Args = SmallVec<[Arg; 4]>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Lit {
    Call(PredId, Args),
    /// `p_f(inputs.., output)`: the output is the last argument.
    Abd(FunctorId, Args),
}

impl Lit {
    pub fn args(&self) -> &Args {
        match self {
            Lit::Call(_, a) | Lit::Abd(_, a) => a,
        }
    }

    fn args_mut(&mut self) -> &mut Args {
        match self {
            Lit::Call(_, a) | Lit::Abd(_, a) => a,
        }
    }

    pub fn is_call(&self) -> bool {
        matches!(self, Lit::Call(..))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Head {
    False,
    Atom(PredId, Args),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EClause {
    pub head: Head,
    pub body: Vec<Lit>,
    pub nvars: u16,
}

fn lvars(vs: &[u32]) -> Args {
    vs.iter().map(|&v| Arg::Var(v as u16)).collect()
}

fn lit_of(l: &Literal) -> Lit {
    match l {
        Literal::Call(c) => Lit::Call(c.pred, lvars(&c.args)),
        Literal::Abduce(a) => {
            let mut args = lvars(&a.inputs);
            args.push(Arg::Var(a.output as u16));
            Lit::Abd(a.functor, args)
        }
    }
}

impl EClause {
    pub fn from_clause(c: &AbstractClause) -> Self {
        EClause {
            head: Head::Atom(c.head.pred, lvars(&c.head.args)),
            body: c.body.iter().map(lit_of).collect(),
            nvars: c.num_vars as u16,
        }
        .canonical()
    }

    pub fn from_query(q: &AbstractQuery) -> Self {
        EClause { head: Head::False, body: q.body.iter().map(lit_of).collect(), nvars: q.num_vars as u16 }.canonical()
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    pub fn head_args(&self) -> &[Arg] {
        match &self.head {
            Head::False => &[],
            Head::Atom(_, a) => a,
        }
    }

    /// Renames variables by order of first occurrence (head, then body).
    pub fn canonical(mut self) -> Self {
        let mut map: SmallVec<[u16; 16]> = SmallVec::from_elem(u16::MAX, self.nvars as usize);
        let mut next = 0u16;
        let mut rename = |a: &mut Arg| {
            if let Arg::Var(v) = a {
                let slot = &mut map[*v as usize];
                if *slot == u16::MAX {
                    *slot = next;
                    next += 1;
                }
                *v = *slot;
            }
        };
        if let Head::Atom(_, args) = &mut self.head {
            args.iter_mut().for_each(&mut rename);
        }
        for l in &mut self.body {
            l.args_mut().iter_mut().for_each(&mut rename);
        }
        self.nvars = next;
        self
    }

    /// Key identifying the clause up to variable renaming; `self` must be canonical.
    pub fn key(&self) -> Box<[u32]> {
        let enc = |a: &Arg| match a {
            Arg::Var(v) => (*v as u32) << 1,
            Arg::Val(e) => (e.0 as u32) << 1 | 1,
        };
        let mut out = Vec::with_capacity(4 + self.body.len() * 4);
        match &self.head {
            Head::False => out.push(u32::MAX),
            Head::Atom(p, args) => {
                out.push(p.0);
                out.push(args.len() as u32);
                out.extend(args.iter().map(enc));
            }
        }
        for l in &self.body {
            match l {
                Lit::Call(p, args) => {
                    out.push(p.0 << 1);
                    out.push(args.len() as u32);
                    out.extend(args.iter().map(enc));
                }
                Lit::Abd(f, args) => {
                    out.push(f.0 << 1 | 1);
                    out.push(args.len() as u32);
                    out.extend(args.iter().map(enc));
                }
            }
        }
        out.into_boxed_slice()
    }

    pub fn render(&self, symbols: &Symbols) -> String {
        let arg = |a: &Arg| match a {
            Arg::Var(v) => format!("X{v}"),
            Arg::Val(e) => e.to_string(),
        };
        let args = |a: &[Arg]| {
            if a.is_empty() {
                String::new()
            } else {
                format!("({})", a.iter().map(arg).collect::<Vec<_>>().join(","))
            }
        };
        let mut out = match &self.head {
            Head::False => "false".to_owned(),
            Head::Atom(p, a) => format!("{}{}", symbols.pred_symbol(*p).name, args(a)),
        };
        if !self.body.is_empty() {
            out.push_str(" <- ");
            for (i, l) in self.body.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = match l {
                    Lit::Call(p, a) => write!(out, "{}{}", symbols.pred_symbol(*p).name, args(a)),
                    Lit::Abd(f, a) => write!(out, "p_{}{}", symbols.functor_symbol(*f).name, args(a)),
                };
            }
        }
        out
    }
}

/// A substitution over the variables of (at most) two renamed-apart clauses.
pub struct Subst {
    bind: SmallVec<[Option<Arg>; 32]>,
}

impl Subst {
    pub fn new(nvars: usize) -> Self {
        Subst { bind: SmallVec::from_elem(None, nvars) }
    }

    pub fn walk(&self, mut a: Arg) -> Arg {
        while let Arg::Var(v) = a {
            match self.bind[v as usize] {
                Some(b) => a = b,
                None => break,
            }
        }
        a
    }

    pub fn unify(&mut self, a: Arg, b: Arg) -> bool {
        let (a, b) = (self.walk(a), self.walk(b));
        match (a, b) {
            _ if a == b => true,
            (Arg::Var(v), other) | (other, Arg::Var(v)) => {
                self.bind[v as usize] = Some(other);
                true
            }
            _ => false,
        }
    }

    pub fn apply(&self, args: &Args) -> Args {
        args.iter().map(|&a| self.walk(a)).collect()
    }
}

/// Shifts every variable of `args` by `offset`.
fn shifted(args: &Args, offset: u16) -> Args {
    args.iter()
        .map(|a| match a {
            Arg::Var(v) => Arg::Var(v + offset),
            other => *other,
        })
        .collect()
}

/// Resolves body literal `at` of `clause` (a call) against the head of
/// `answer`, splicing the answer's body in its place.
pub fn resolve_call(clause: &EClause, at: usize, answer: &EClause) -> Option<EClause> {
    let Lit::Call(_, call_args) = &clause.body[at] else { panic!("resolve_call on a non-call literal") };
    let offset = clause.nvars;
    let ans_args = shifted(
        match &answer.head {
            Head::Atom(_, a) => a,
            Head::False => panic!("answer without head"),
        },
        offset,
    );
    let mut s = Subst::new((clause.nvars + answer.nvars) as usize);
    for (&x, &y) in call_args.iter().zip(&ans_args) {
        if !s.unify(x, y) {
            return None;
        }
    }
    let mut body = Vec::with_capacity(clause.body.len() + answer.body.len());
    for (i, l) in clause.body.iter().enumerate() {
        if i == at {
            for al in &answer.body {
                let mut al = al.clone();
                *al.args_mut() = s.apply(&shifted(al.args(), offset));
                body.push(al);
            }
        } else {
            let mut l = l.clone();
            *l.args_mut() = s.apply(l.args());
            body.push(l);
        }
    }
    let head = match &clause.head {
        Head::False => Head::False,
        Head::Atom(p, a) => Head::Atom(*p, s.apply(a)),
    };
    Some(EClause { head, body, nvars: clause.nvars + answer.nvars }.canonical())
}

/// Resolves abducible literal `at` against the ground fact `p_f(values)`.
pub fn resolve_abd(clause: &EClause, at: usize, values: &[Elem]) -> Option<EClause> {
    let mut s = Subst::new(clause.nvars as usize);
    for (&x, &v) in clause.body[at].args().iter().zip(values) {
        if !s.unify(x, Arg::Val(v)) {
            return None;
        }
    }
    let body = clause
        .body
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != at)
        .map(|(_, l)| {
            let mut l = l.clone();
            *l.args_mut() = s.apply(l.args());
            l
        })
        .collect();
    let head = match &clause.head {
        Head::False => Head::False,
        Head::Atom(p, a) => Head::Atom(*p, s.apply(a)),
    };
    Some(EClause { head, body, nvars: clause.nvars }.canonical())
}

/// Whether the fact head `general` has `specific` as an instance.
pub fn head_subsumes(general: &[Arg], specific: &[Arg], general_vars: u16) -> bool {
    let mut bind: SmallVec<[Option<Arg>; 16]> = SmallVec::from_elem(None, general_vars as usize);
    for (&g, &s) in general.iter().zip(specific) {
        match g {
            Arg::Val(e) => {
                if s != Arg::Val(e) {
                    return false;
                }
            }
            Arg::Var(v) => match bind[v as usize] {
                Some(b) if b != s => return false,
                Some(_) => {}
                None => bind[v as usize] = Some(s),
            },
        }
    }
    true
}

/// Instances of the input arguments of an abducible literal: every way of
/// assigning its distinct free input variables, as full input tuples.
pub fn input_instances(args: &[Arg], n: usize) -> Vec<Tuple> {
    let inputs = &args[..args.len() - 1];
    let mut free: SmallVec<[u16; 4]> = SmallVec::new();
    for a in inputs {
        if let Arg::Var(v) = a {
            if !free.contains(v) {
                free.push(*v);
            }
        }
    }
    let count = n.pow(free.len() as u32);
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        let vals = crate::preinterp::tuple_at(idx, free.len(), n);
        out.push(
            inputs
                .iter()
                .map(|a| match a {
                    Arg::Val(e) => *e,
                    Arg::Var(v) => vals[free.iter().position(|w| w == v).unwrap()],
                })
                .collect(),
        );
    }
    out
}
