//! Bottom-up evaluation of an abstracted program over a fixed
//! pre-interpretation, query checking, and failure certificates.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::abstraction::{abstract_compile, AbstractProgram, Literal};
use crate::preinterp::{tuple_at, tuple_index, Elem, PreInterpretation, Tuple};
use crate::syntax::{parse_program, ParseError, PredId, Symbols};

/// A Herbrand-style interpretation over the domain: one relation per predicate.
#[derive(Debug, Clone)]
pub struct Interpretation {
    n: usize,
    arities: Vec<usize>,
    member: Vec<Vec<bool>>,
    /// Tuple indices per predicate in derivation order.
    order: Vec<Vec<u32>>,
}

impl PartialEq for Interpretation {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.member == other.member
    }
}

impl Eq for Interpretation {}

impl Interpretation {
    pub fn empty(n: usize, pred_arities: Vec<usize>) -> Self {
        let member = pred_arities.iter().map(|&k| vec![false; n.pow(k as u32)]).collect();
        let order = vec![Vec::new(); pred_arities.len()];
        Interpretation { n, arities: pred_arities, member, order }
    }

    pub fn for_symbols(n: usize, symbols: &Symbols) -> Self {
        Self::empty(n, symbols.preds().map(|p| symbols.pred_arity(p)).collect())
    }

    pub fn contains(&self, p: PredId, tuple: &[Elem]) -> bool {
        self.member[p.0 as usize][tuple_index(tuple, self.n)]
    }

    /// Adds an atom; returns whether it was new.
    pub fn insert(&mut self, p: PredId, tuple: &[Elem]) -> bool {
        self.insert_index(p.0 as usize, tuple_index(tuple, self.n))
    }

    fn insert_index(&mut self, p: usize, idx: usize) -> bool {
        if self.member[p][idx] {
            return false;
        }
        self.member[p][idx] = true;
        self.order[p].push(idx as u32);
        true
    }

    pub fn len(&self) -> usize {
        self.order.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All atoms, sorted by predicate then tuple.
    pub fn atoms(&self) -> Vec<(PredId, Tuple)> {
        let mut out = Vec::new();
        for (p, m) in self.member.iter().enumerate() {
            for (i, &b) in m.iter().enumerate() {
                if b {
                    out.push((PredId(p as u32), tuple_at(i, self.arities[p], self.n)));
                }
            }
        }
        out
    }

    pub fn tuples(&self, p: PredId) -> impl Iterator<Item = Tuple> + '_ {
        let k = self.arities[p.0 as usize];
        self.order[p.0 as usize].iter().map(move |&i| tuple_at(i as usize, k, self.n))
    }
}

/// Which slice of a relation a call literal reads.
#[derive(Clone, Copy)]
struct Window {
    lo: usize,
    hi: usize,
}

struct Evaluator<'a> {
    ap: &'a AbstractProgram,
    j: &'a PreInterpretation,
    n: usize,
}

impl Evaluator<'_> {
    /// Enumerates all bindings satisfying `body`, reading call literal `i`
    /// from `windows(i, pred)`. Calls `emit` for each complete binding.
    fn join(
        &self,
        body: &[Literal],
        model: &Interpretation,
        windows: &dyn Fn(usize, usize) -> Window,
        binding: &mut Vec<Option<Elem>>,
        at: usize,
        emit: &mut dyn FnMut(&[Option<Elem>]) -> bool,
    ) -> bool {
        let Some(lit) = body.get(at) else {
            return emit(binding);
        };
        match lit {
            Literal::Call(c) => {
                let p = c.pred.0 as usize;
                let w = windows(at, p);
                let k = c.args.len();
                for &idx in &model.order[p][w.lo..w.hi] {
                    let t = tuple_at(idx as usize, k, self.n);
                    let mut bound = Vec::new();
                    if self.unify(&c.args, &t, binding, &mut bound)
                        && !self.join(body, model, windows, binding, at + 1, emit)
                    {
                        return false;
                    }
                    for v in bound {
                        binding[v as usize] = None;
                    }
                }
                true
            }
            Literal::Abduce(a) => {
                let k = a.inputs.len();
                if a.inputs.iter().all(|&v| binding[v as usize].is_some()) {
                    let inputs: Tuple = a.inputs.iter().map(|&v| binding[v as usize].unwrap()).collect();
                    let Some(out) = self.j.get(a.functor, &inputs) else { return true };
                    return match binding[a.output as usize] {
                        Some(o) if o != out => true,
                        Some(_) => self.join(body, model, windows, binding, at + 1, emit),
                        None => {
                            binding[a.output as usize] = Some(out);
                            let r = self.join(body, model, windows, binding, at + 1, emit);
                            binding[a.output as usize] = None;
                            r
                        }
                    };
                }
                let mut vars = a.inputs.clone();
                vars.push(a.output);
                for idx in 0..self.n.pow(k as u32) {
                    let Some(out) = self.j.get_index(a.functor, idx) else { continue };
                    let mut t = tuple_at(idx, k, self.n);
                    t.push(out);
                    let mut bound = Vec::new();
                    if self.unify(&vars, &t, binding, &mut bound)
                        && !self.join(body, model, windows, binding, at + 1, emit)
                    {
                        return false;
                    }
                    for v in bound {
                        binding[v as usize] = None;
                    }
                }
                true
            }
        }
    }

    fn unify(&self, vars: &[u32], t: &[Elem], binding: &mut [Option<Elem>], bound: &mut Vec<u32>) -> bool {
        for (&v, &e) in vars.iter().zip(t) {
            match binding[v as usize] {
                Some(x) if x != e => {
                    for &b in bound.iter() {
                        binding[b as usize] = None;
                    }
                    bound.clear();
                    return false;
                }
                Some(_) => {}
                None => {
                    binding[v as usize] = Some(e);
                    bound.push(v);
                }
            }
        }
        true
    }

    fn head_index(&self, args: &[u32], binding: &[Option<Elem>]) -> usize {
        // Head variables not bound by the body range over the whole domain;
        // abstracted programs from range-restricted sources never need this,
        // but facts like `p(X).` do.
        args.iter().fold(0, |acc, &v| acc * self.n + binding[v as usize].map_or(0, |e| e.0 as usize))
    }

    /// Expands unbound head variables and inserts every resulting tuple.
    fn derive(&self, pred: usize, args: &[u32], binding: &[Option<Elem>], out: &mut Vec<(usize, usize)>) {
        let free: Vec<u32> = {
            let mut f: Vec<u32> = args.iter().copied().filter(|&v| binding[v as usize].is_none()).collect();
            f.dedup();
            f.sort_unstable();
            f.dedup();
            f
        };
        if free.is_empty() {
            out.push((pred, self.head_index(args, binding)));
            return;
        }
        let mut b = binding.to_vec();
        for idx in 0..self.n.pow(free.len() as u32) {
            let t = tuple_at(idx, free.len(), self.n);
            for (&v, &e) in free.iter().zip(&t) {
                b[v as usize] = Some(e);
            }
            out.push((pred, self.head_index(args, &b)));
        }
    }
}

/// Least model of the abstracted program together with the relational form
/// of `j` (undefined components of a partial `j` are simply absent).
/// Semi-naive evaluation.
pub fn least_model(ap: &AbstractProgram, j: &PreInterpretation) -> Interpretation {
    let ev = Evaluator { ap, j, n: j.size() };
    let mut model = Interpretation::for_symbols(j.size(), &ap.symbols);
    let npreds = model.member.len();
    // prev[p]..cur[p] is the delta of the last round.
    let mut prev = vec![0usize; npreds];
    let mut cur = vec![0usize; npreds];
    let mut first = true;
    loop {
        let mut derived = Vec::new();
        for c in &ev.ap.clauses {
            let calls: Vec<usize> = c
                .body
                .iter()
                .enumerate()
                .filter(|(_, l)| matches!(l, Literal::Call(_)))
                .map(|(i, _)| i)
                .collect();
            let mut binding = vec![None; c.num_vars as usize];
            let mut emit = |b: &[Option<Elem>]| {
                ev.derive(c.head.pred.0 as usize, &c.head.args, b, &mut derived);
                true
            };
            if first {
                if calls.is_empty() {
                    let w = |_: usize, _: usize| Window { lo: 0, hi: 0 };
                    ev.join(&c.body, &model, &w, &mut binding, 0, &mut emit);
                }
                continue;
            }
            for &d in &calls {
                let w = |i: usize, p: usize| {
                    if i == d {
                        Window { lo: prev[p], hi: cur[p] }
                    } else {
                        Window { lo: 0, hi: cur[p] }
                    }
                };
                ev.join(&c.body, &model, &w, &mut binding, 0, &mut emit);
            }
        }
        first = false;
        prev.clone_from(&cur);
        let mut changed = false;
        for (p, idx) in derived {
            changed |= model.insert_index(p, idx);
        }
        for (p, c) in cur.iter_mut().enumerate() {
            *c = model.order[p].len();
        }
        if !changed {
            return model;
        }
    }
}

/// Naive evaluation: apply every clause to the whole model until nothing
/// changes. Used as a reference for [`least_model`].
pub fn least_model_naive(ap: &AbstractProgram, j: &PreInterpretation) -> Interpretation {
    let ev = Evaluator { ap, j, n: j.size() };
    let mut model = Interpretation::for_symbols(j.size(), &ap.symbols);
    loop {
        let mut derived = Vec::new();
        let sizes: Vec<usize> = model.order.iter().map(Vec::len).collect();
        let w = |_: usize, p: usize| Window { lo: 0, hi: sizes[p] };
        for c in &ap.clauses {
            let mut binding = vec![None; c.num_vars as usize];
            ev.join(&c.body, &model, &w, &mut binding, 0, &mut |b| {
                ev.derive(c.head.pred.0 as usize, &c.head.args, b, &mut derived);
                true
            });
        }
        let mut changed = false;
        for (p, idx) in derived {
            changed |= model.insert_index(p, idx);
        }
        if !changed {
            return model;
        }
    }
}

/// Whether the query has a solution in `model` (joined with `j`).
pub fn query_holds(ap: &AbstractProgram, j: &PreInterpretation, model: &Interpretation) -> bool {
    let ev = Evaluator { ap, j, n: j.size() };
    let sizes: Vec<usize> = model.order.iter().map(Vec::len).collect();
    let w = |_: usize, p: usize| Window { lo: 0, hi: sizes[p] };
    let mut binding = vec![None; ap.query.num_vars as usize];
    let mut found = false;
    ev.join(&ap.query.body, model, &w, &mut binding, 0, &mut |_| {
        found = true;
        false
    });
    found
}

/// The query has no solution in the least model under `j`.
pub fn query_fails(ap: &AbstractProgram, j: &PreInterpretation) -> bool {
    !query_holds(ap, j, &least_model(ap, j))
}

/// `sha256:<hex>` digest of a program source.
pub fn source_digest(source: &str) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(source.as_bytes())))
}

/// A total pre-interpretation under which a query fails, bound to the exact
/// program text it was found for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub digest: String,
    pub query: String,
    pub domain_size: usize,
    /// Sorted `f(d0,d1) = d2` lines.
    pub components: Vec<String>,
}

#[derive(Debug, Error)]
pub enum CertificateError {
    #[error("malformed certificate line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("certificate is missing the `{0}` header")]
    MissingHeader(&'static str),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Why a well-formed certificate was not accepted.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Rejection {
    #[error("program digest {found} does not match certificate digest {expected}")]
    DigestMismatch { expected: String, found: String },
    #[error("certificate mentions unknown functor `{0}`")]
    UnknownFunctor(String),
    #[error("component `{0}` is out of range or defined twice")]
    BadComponent(String),
    #[error("pre-interpretation is not total: `{0}` is undefined")]
    NotTotal(String),
    #[error("the query succeeds under the certified pre-interpretation")]
    QuerySucceeds,
}

impl Certificate {
    pub fn new(source: &str, query: &str, symbols: &Symbols, j: &PreInterpretation) -> Self {
        Certificate {
            digest: source_digest(source),
            query: query.to_owned(),
            domain_size: j.size(),
            components: j.render(symbols),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "% prefail certificate");
        let _ = writeln!(out, "program {}", self.digest);
        let _ = writeln!(out, "query {}", self.query);
        let _ = writeln!(out, "domain {}", self.domain_size);
        for c in &self.components {
            let _ = writeln!(out, "{c}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, CertificateError> {
        let (mut digest, mut query, mut domain) = (None, None, None);
        let mut components = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('%') {
                continue;
            }
            let malformed = |m: &str| CertificateError::Malformed { line: i + 1, message: m.to_owned() };
            if let Some(rest) = line.strip_prefix("program ") {
                digest = Some(rest.trim().to_owned());
            } else if let Some(rest) = line.strip_prefix("query ") {
                query = Some(rest.trim().to_owned());
            } else if let Some(rest) = line.strip_prefix("domain ") {
                let n: usize = rest.trim().parse().map_err(|_| malformed("bad domain size"))?;
                if !(1..=crate::preinterp::MAX_DOMAIN).contains(&n) {
                    return Err(malformed("domain size out of range"));
                }
                domain = Some(n);
            } else if line.contains(" = ") {
                components.push(line.to_owned());
            } else {
                return Err(malformed("expected a header or a `f(..) = d` line"));
            }
        }
        components.sort();
        Ok(Certificate {
            digest: digest.ok_or(CertificateError::MissingHeader("program"))?,
            query: query.ok_or(CertificateError::MissingHeader("query"))?,
            domain_size: domain.ok_or(CertificateError::MissingHeader("domain"))?,
            components,
        })
    }

    /// Rebuilds the pre-interpretation over the functors of `symbols`.
    pub fn preinterp(&self, symbols: &Symbols) -> Result<PreInterpretation, Rejection> {
        let n = self.domain_size;
        let mut j = PreInterpretation::for_symbols(n, symbols);
        for line in &self.components {
            let bad = || Rejection::BadComponent(line.clone());
            let (lhs, rhs) = line.rsplit_once(" = ").ok_or_else(bad)?;
            let out = parse_elem(rhs.trim(), n).ok_or_else(bad)?;
            let (name, args) = match lhs.find('(') {
                Some(open) if lhs.ends_with(')') => {
                    let args = lhs[open + 1..lhs.len() - 1]
                        .split(',')
                        .map(|a| parse_elem(a.trim(), n))
                        .collect::<Option<Tuple>>()
                        .ok_or_else(bad)?;
                    (&lhs[..open], args)
                }
                _ => (lhs, Tuple::new()),
            };
            let name = name.trim().trim_matches('\'');
            let f = symbols
                .lookup_functor(name, args.len())
                .ok_or_else(|| Rejection::UnknownFunctor(format!("{name}/{}", args.len())))?;
            if j.get(f, &args).is_some() {
                return Err(bad());
            }
            j.set(f, &args, out);
        }
        if let Some((f, inputs)) = j.first_missing() {
            let args: Vec<String> = inputs.iter().map(Elem::to_string).collect();
            return Err(Rejection::NotTotal(format!("{}({})", symbols.functor_symbol(f).name, args.join(","))));
        }
        Ok(j)
    }
}

fn parse_elem(s: &str, n: usize) -> Option<Elem> {
    let v: usize = s.strip_prefix('d')?.parse().ok()?;
    (v < n).then_some(Elem(v as u8))
}

/// Re-checks a certificate from the program source: digest, totality, and
/// failure of the query in the least model.
pub fn verify_certificate(source: &str, cert: &Certificate) -> Result<Result<(), Rejection>, CertificateError> {
    let found = source_digest(source);
    if found != cert.digest {
        return Ok(Err(Rejection::DigestMismatch { expected: cert.digest.clone(), found }));
    }
    let (program, query) = parse_program(source, Some(&cert.query))?;
    let ap = abstract_compile(&program, &query);
    let j = match cert.preinterp(&ap.symbols) {
        Ok(j) => j,
        Err(r) => return Ok(Err(r)),
    };
    if query_fails(&ap, &j) {
        Ok(Ok(()))
    } else {
        Ok(Err(Rejection::QuerySucceeds))
    }
}
