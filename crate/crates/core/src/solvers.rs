//! Consistency checking for stores of ground formulas.
//!
//! Two back ends decide whether some pre-interpretation satisfies every
//! posted formula. The abductive solver extends a partial function table
//! cell by cell, evaluating formulas three-valued, and backjumps on
//! conflict sets built from the cells a false formula actually read. The
//! finite-domain solver encodes each ground term as a variable, channels
//! terms with all-fixed arguments to their table cell, propagates the
//! formulas and branches first-fail, chronologically.

use std::fmt::Write as _;
use std::time::Instant;

use smallvec::SmallVec;
use thiserror::Error;

use crate::conflict::{ConflictSet, GeneratorRecord};
use crate::encoding::{Arena, GTerm, Node, NodeId, TermId};
use crate::preinterp::{tuple_at, tuple_index, Elem, PreInterpretation, Tuple, MAX_DOMAIN};
use crate::syntax::{FunctorId, Symbols};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SolverKind {
    #[default]
    Abductive,
    Fd,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverHalt {
    #[error("deadline reached")]
    Timeout,
    #[error("constraint not encodable: {0}")]
    ConstraintNotEncodable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tri {
    True,
    False,
    Unknown,
}

const UNSEEN: u8 = 0xFF;
const UNDET: u8 = 0xFE;

/// A function-table cell chosen at some depth, with its remaining values.
#[derive(Debug, Clone)]
struct SChoice {
    functor: FunctorId,
    index: usize,
    candidates: SmallVec<[u32; 8]>,
    next: usize,
    current: u32,
    record: GeneratorRecord,
}

/// Incremental abductive solver. Cloning it is a snapshot.
///
/// It abduces table cells as the evaluation of the formulas needs them.
/// Required equations whose application side has known arguments fix
/// their cell directly, with the reason recorded so that backjumping
/// stays exact. Otherwise a domain-propagation look-ahead over the
/// current table rejects dead ends early and picks the next cell
/// first-fail; a look-ahead failure blames every open level.
///
/// With `symmetry` on, values are tried least-number first, which is only
/// complete for stores closed under permutations of the domain (as the
/// constraints posted by the search are: free variables range over the
/// whole domain).
#[derive(Debug, Clone)]
pub struct AbductiveSolver {
    n: usize,
    table: PreInterpretation,
    depth: Vec<Vec<u32>>,
    stack: Vec<SChoice>,
    roots: Vec<NodeId>,
    /// Roots `[..settled.len()]` are true under every extension of the
    /// choices at depths `< settled[i]`.
    settled: Vec<u32>,
    intelligent: bool,
    symmetry: bool,
}

/// A cell some literal forces, with its value and the levels it rests on.
type Forced = (FunctorId, Tuple, Elem, ConflictSet);

/// Three-valued evaluation of formulas under a partial table, with
/// per-pass caches of term values and node statuses.
struct Eval<'a> {
    arena: &'a Arena,
    table: &'a PreInterpretation,
    depth: &'a [Vec<u32>],
    n: usize,
    vals: &'a mut Vec<u8>,
    /// Possible values of undetermined terms (0 = not computed).
    doms: &'a mut Vec<u32>,
    status: &'a mut Vec<u8>,
}

impl Eval<'_> {
    fn term(&mut self, t: TermId) -> Option<Elem> {
        match self.vals[t as usize] {
            UNSEEN => {}
            UNDET => return None,
            v => return Some(Elem(v)),
        }
        let v = match self.arena.term(t) {
            GTerm::Elem(e) => Some(*e),
            GTerm::App(f, args) => {
                let mut ins: SmallVec<[Elem; 4]> = SmallVec::new();
                let mut ok = true;
                for &a in args {
                    match self.term(a) {
                        Some(e) => ins.push(e),
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    self.table.get(*f, &ins)
                } else {
                    None
                }
            }
        };
        self.vals[t as usize] = v.map_or(UNDET, |e| e.0);
        v
    }

    /// Values `t` can still take given the defined cells.
    fn dom(&mut self, t: TermId) -> u32 {
        let full = (1u32 << self.n) - 1;
        if let Some(v) = self.term(t) {
            return 1 << v.0;
        }
        if self.doms[t as usize] != 0 {
            return self.doms[t as usize];
        }
        let GTerm::App(f, args) = self.arena.term(t) else { unreachable!() };
        let ds: SmallVec<[u32; 4]> = args.iter().map(|&a| self.dom(a)).collect();
        let size: u32 = ds.iter().map(|d| d.count_ones()).product();
        let out = if size > 64 { full } else { self.image(*f, &ds, full) };
        self.doms[t as usize] = out;
        out
    }

    /// Union of the cells of `f` over the argument domains `ds`.
    fn image(&self, f: FunctorId, ds: &[u32], full: u32) -> u32 {
        let mut out = 0;
        let mut ins: Tuple = ds.iter().map(|d| Elem(d.trailing_zeros() as u8)).collect();
        loop {
            match self.table.get(f, &ins) {
                Some(v) => out |= 1 << v.0,
                None => return full,
            }
            if out == full {
                return full;
            }
            // Next tuple in the product.
            let mut i = 0;
            loop {
                if i == ins.len() {
                    return out;
                }
                let rest = ds[i] & !((2u32 << ins[i].0) - 1);
                if rest != 0 {
                    ins[i] = Elem(rest.trailing_zeros() as u8);
                    break;
                }
                ins[i] = Elem(ds[i].trailing_zeros() as u8);
                i += 1;
            }
        }
    }

    fn node(&mut self, id: NodeId) -> Tri {
        match self.status[id as usize] {
            1 => return Tri::True,
            2 => return Tri::False,
            3 => return Tri::Unknown,
            _ => {}
        }
        let out = match self.arena.node(id) {
            Node::True => Tri::True,
            Node::False => Tri::False,
            Node::Eq(a, b) | Node::Neq(a, b) => {
                let eq = matches!(self.arena.node(id), Node::Eq(..));
                match (self.term(a), self.term(b)) {
                    (Some(x), Some(y)) if (x == y) == eq => Tri::True,
                    (Some(_), Some(_)) => Tri::False,
                    _ if self.dom(a) & self.dom(b) == 0 => {
                        if eq {
                            Tri::False
                        } else {
                            Tri::True
                        }
                    }
                    _ => Tri::Unknown,
                }
            }
            Node::And(s, l) | Node::Or(s, l) => {
                let is_and = matches!(self.arena.node(id), Node::And(..));
                let (absorb, unit) = if is_and { (Tri::False, Tri::True) } else { (Tri::True, Tri::False) };
                let mut out = unit;
                for &k in self.arena.kids(s, l) {
                    match self.node(k) {
                        x if x == absorb => {
                            out = absorb;
                            break;
                        }
                        Tri::Unknown => out = Tri::Unknown,
                        _ => {}
                    }
                }
                out
            }
        };
        self.status[id as usize] = match out {
            Tri::True => 1,
            Tri::False => 2,
            Tri::Unknown => 3,
        };
        out
    }

    /// Looks for a forced cell in the required part of the unknown node
    /// `id`: every unknown child of a conjunction, the only open child of a
    /// disjunction. `path` holds the disjunctions entered that way.
    fn scan(&mut self, id: NodeId, path: &mut Vec<(NodeId, NodeId)>) -> Option<Forced> {
        match self.arena.node(id) {
            Node::True | Node::False => None,
            Node::Eq(a, b) | Node::Neq(a, b) => {
                let eq = matches!(self.arena.node(id), Node::Eq(..));
                let (t, other) = if self.term(a).is_none() { (a, b) } else { (b, a) };
                let v = self.term(other)?;
                let GTerm::App(f, args) = self.arena.term(t) else { return None };
                let ins: Tuple = args.iter().map(|&x| self.term(x)).collect::<Option<_>>()?;
                let value = if eq {
                    v
                } else if self.n == 2 {
                    Elem(1 - v.0)
                } else {
                    return None;
                };
                let mut why = ConflictSet::empty();
                for &(or, kid) in path.iter() {
                    let Node::Or(s, l) = self.arena.node(or) else { unreachable!() };
                    for &k in self.arena.kids(s, l) {
                        if k != kid {
                            let c = self.explain(k, false);
                            why.union_with(&c);
                        }
                    }
                }
                self.term_depths(other, &mut why);
                for &x in args {
                    self.term_depths(x, &mut why);
                }
                Some((*f, ins, value, why))
            }
            Node::And(s, l) => {
                for &k in self.arena.kids(s, l) {
                    if self.node(k) == Tri::Unknown {
                        if let Some(found) = self.scan(k, path) {
                            return Some(found);
                        }
                    }
                }
                None
            }
            Node::Or(s, l) => {
                let mut open = self.arena.kids(s, l).iter().copied().filter(|&k| self.node(k) == Tri::Unknown);
                let (Some(k), None) = (open.next(), open.next()) else { return None };
                path.push((id, k));
                let found = self.scan(k, path);
                path.pop();
                found
            }
        }
    }

    /// Adds the depths of the cells read while evaluating `t`.
    fn term_depths(&mut self, t: TermId, out: &mut ConflictSet) {
        if let GTerm::App(f, args) = self.arena.term(t) {
            for &a in args {
                self.term_depths(a, out);
            }
            let ins: Option<Tuple> = args.iter().map(|&a| self.term(a)).collect();
            match ins {
                Some(ins) => {
                    if self.table.get(*f, &ins).is_some() {
                        out.insert(self.depth[f.0 as usize][tuple_index(&ins, self.n)] as usize);
                    }
                }
                None => {
                    // Every defined cell the domain of `t` was drawn from.
                    let ds: SmallVec<[u32; 4]> = args.iter().map(|&a| self.dom(a)).collect();
                    let mut ins: Tuple = ds.iter().map(|d| Elem(d.trailing_zeros() as u8)).collect();
                    'product: loop {
                        if self.table.get(*f, &ins).is_some() {
                            out.insert(self.depth[f.0 as usize][tuple_index(&ins, self.n)] as usize);
                        }
                        let mut i = 0;
                        loop {
                            if i == ins.len() {
                                break 'product;
                            }
                            let rest = ds[i] & !((2u32 << ins[i].0) - 1);
                            if rest != 0 {
                                ins[i] = Elem(rest.trailing_zeros() as u8);
                                break;
                            }
                            ins[i] = Elem(ds[i].trailing_zeros() as u8);
                            i += 1;
                        }
                    }
                }
            }
        }
    }

    /// Choice depths that make `id` false (`want == false`) or true.
    fn explain(&mut self, id: NodeId, want: bool) -> ConflictSet {
        let mut out = ConflictSet::empty();
        match self.arena.node(id) {
            Node::True | Node::False => {}
            Node::Eq(a, b) | Node::Neq(a, b) => {
                self.term_depths(a, &mut out);
                self.term_depths(b, &mut out);
            }
            Node::And(s, l) | Node::Or(s, l) => {
                let is_and = matches!(self.arena.node(id), Node::And(..));
                let target = if want { Tri::True } else { Tri::False };
                if is_and != want {
                    // One witnessing child suffices: take the shallowest.
                    let mut best: Option<ConflictSet> = None;
                    for &k in self.arena.kids(s, l) {
                        if self.node(k) == target {
                            let c = self.explain(k, want);
                            if best.as_ref().is_none_or(|b| c.max() < b.max()) {
                                let done = c.is_empty();
                                best = Some(c);
                                if done {
                                    break;
                                }
                            }
                        }
                    }
                    out = best.unwrap_or_default();
                } else {
                    for &k in self.arena.kids(s, l) {
                        let c = self.explain(k, want);
                        out.union_with(&c);
                    }
                }
            }
        }
        out
    }
}

impl AbductiveSolver {
    pub fn new(n: usize, arities: Vec<usize>, intelligent: bool, symmetry: bool) -> Self {
        let depth = arities.iter().map(|&a| vec![u32::MAX; n.pow(a as u32)]).collect();
        AbductiveSolver {
            n,
            table: PreInterpretation::new(n, arities),
            depth,
            stack: Vec::new(),
            roots: Vec::new(),
            settled: Vec::new(),
            intelligent,
            symmetry,
        }
    }

    pub fn post(&mut self, root: NodeId) {
        self.roots.push(root);
    }

    pub fn roots(&self) -> &[NodeId] {
        &self.roots
    }

    /// Current partial function table; it satisfies every posted formula
    /// after a successful [`check`](Self::check).
    pub fn witness(&self) -> &PreInterpretation {
        &self.table
    }

    fn undefine_top(&mut self) {
        let ch = self.stack.pop().expect("non-empty stack");
        self.table.set_index(ch.functor, ch.index, None);
        self.depth[ch.functor.0 as usize][ch.index] = u32::MAX;
        let d = self.stack.len() as u32;
        while self.settled.last().is_some_and(|&s| s > d) {
            self.settled.pop();
        }
    }

    fn set_top(&mut self, v: u32) {
        let d = self.stack.len() - 1;
        let ch = &mut self.stack[d];
        ch.current = v;
        self.table.set_index(ch.functor, ch.index, Some(Elem(v as u8)));
        self.depth[ch.functor.0 as usize][ch.index] = d as u32;
    }

    fn push(&mut self, functor: FunctorId, index: usize, candidates: SmallVec<[u32; 8]>, record: GeneratorRecord) {
        let first = candidates[0];
        self.stack.push(SChoice { functor, index, candidates, next: 1, current: first, record });
        self.set_top(first);
    }

    /// Candidate values for a cell with the given inputs.
    fn candidates(&self, inputs: &[Elem]) -> SmallVec<[u32; 8]> {
        if !self.symmetry {
            return (0..self.n as u32).collect();
        }
        let mut used = vec![false; self.n];
        for e in inputs {
            used[e.0 as usize] = true;
        }
        for ch in &self.stack {
            used[ch.current as usize] = true;
            for e in tuple_at(ch.index, self.table.arity(ch.functor), self.n) {
                used[e.0 as usize] = true;
            }
        }
        let mut out: SmallVec<[u32; 8]> = (0..self.n as u32).filter(|&e| used[e as usize]).collect();
        if let Some(e) = (0..self.n).find(|&e| !used[e]) {
            out.push(e as u32);
        }
        out
    }

    /// Resolves a conflict; `false` when no assignment remains.
    fn backjump(&mut self, mut conflict: ConflictSet, backtracks: &mut u64) -> bool {
        loop {
            let Some(real_max) = conflict.max() else { return false };
            let t = if self.intelligent { real_max } else { self.stack.len() - 1 };
            while self.stack.len() > t + 1 {
                self.undefine_top();
            }
            *backtracks += 1;
            let ch = &mut self.stack[t];
            ch.record.record(Elem(ch.current as u8), conflict.without(t));
            if ch.next < ch.candidates.len() {
                let v = ch.candidates[ch.next];
                ch.next += 1;
                while self.settled.last().is_some_and(|&s| s > t as u32) {
                    self.settled.pop();
                }
                self.set_top(v);
                return true;
            }
            conflict = ch.record.secondary_conflict();
            self.undefine_top();
        }
    }

    /// Whether the posted formulas are jointly satisfiable, extending (and
    /// possibly revising) the current table. Returns the verdict and the
    /// number of backtracks performed.
    pub fn check(&mut self, arena: &Arena, deadline: Option<Instant>) -> Result<(bool, u64), SolverHalt> {
        let mut backtracks = 0;
        let mut vals = Vec::new();
        let mut doms = Vec::new();
        let mut status = Vec::new();
        let arities = self.table.arities().to_vec();
        let model = FdModel::new(arena, self.n, &arities, &self.roots)?;
        let mut ticks = 0u32;
        loop {
            ticks = ticks.wrapping_add(1);
            if ticks.is_multiple_of(64) && deadline.is_some_and(|d| Instant::now() >= d) {
                return Err(SolverHalt::Timeout);
            }
            vals.clear();
            vals.resize(arena.num_terms(), UNSEEN);
            doms.clear();
            doms.resize(arena.num_terms(), 0);
            status.clear();
            status.resize(arena.num_nodes(), 0);
            let mut ev = Eval { arena, table: &self.table, depth: &self.depth, n: self.n, vals: &mut vals, doms: &mut doms, status: &mut status };
            let mut open = false;
            let mut conflict = None;
            for i in self.settled.len()..self.roots.len() {
                let r = self.roots[i];
                match ev.node(r) {
                    Tri::True => {
                        if !open {
                            // Settle the prefix of true roots by their support
                            // depth, kept non-decreasing so that popping from
                            // the end unsettles exactly the roots supported by
                            // a revised level.
                            let own = ev.explain(r, true).max().map_or(0, |m| m as u32 + 1);
                            let prev = self.settled.last().copied().unwrap_or(0);
                            self.settled.push(own.max(prev));
                        }
                    }
                    Tri::False => {
                        conflict = Some(ev.explain(r, false));
                        break;
                    }
                    Tri::Unknown => open = true,
                }
            }
            if let Some(c) = conflict {
                if !self.backjump(c, &mut backtracks) {
                    return Ok((false, backtracks));
                }
                continue;
            }
            if !open {
                return Ok((true, backtracks));
            }
            let mut forced = None;
            let mut path = Vec::new();
            for &root in &self.roots[self.settled.len()..] {
                if ev.node(root) == Tri::Unknown {
                    forced = ev.scan(root, &mut path);
                    if forced.is_some() {
                        break;
                    }
                }
            }
            if let Some((f, ins, v, why)) = forced {
                // A single-value level whose other values are refuted by `why`.
                let mut record = GeneratorRecord::default();
                record.record(v, why);
                self.push(f, tuple_index(&ins, self.n), smallvec::smallvec![v.0 as u32], record);
                continue;
            }

            // Look ahead with domain propagation over the current table.
            let mut dom = model.initial();
            for ch in &self.stack {
                dom[model.cell_offset[ch.functor.0 as usize] + ch.index] = 1 << ch.current;
            }
            let everything = ConflictSet::prefix(self.stack.len());
            if !model.propagate(&mut dom) {
                if !self.backjump(everything, &mut backtracks) {
                    return Ok((false, backtracks));
                }
                continue;
            }
            let c = match model.select(&dom) {
                Some(c) => c,
                // Every referenced cell is fixed by propagation alone.
                None => model.fixed_undefined(&dom, &self.table).expect("open formula reads an undefined cell"),
            };
            let (f, index) = model.cell_at(c);
            let ins = tuple_at(index, self.table.arity(f), self.n);
            let mut record = GeneratorRecord::default();
            let mut cands = SmallVec::new();
            for v in self.candidates(&ins) {
                if dom[c] & (1 << v) != 0 {
                    cands.push(v);
                } else {
                    record.record(Elem(v as u8), everything.clone());
                }
            }
            if cands.is_empty() {
                if !self.backjump(record.secondary_conflict(), &mut backtracks) {
                    return Ok((false, backtracks));
                }
                continue;
            }
            self.push(f, index, cands, record);
        }
    }
}

/// Finite-domain back end: stores the posted formulas and solves them from
/// scratch on every check. Cloning it is a snapshot.
#[derive(Debug, Clone)]
pub struct FdSolver {
    n: usize,
    arities: Vec<usize>,
    roots: Vec<NodeId>,
    solution: Option<PreInterpretation>,
}

/// The finite-domain model of a store: one variable per ground term and per
/// function-table cell, domains as bitsets.
struct FdModel<'a> {
    arena: &'a Arena,
    n: usize,
    arities: &'a [usize],
    cell_offset: Vec<usize>,
    num_cells: usize,
    /// Ground terms used, as arena ids; the variable of `terms[i]` is `num_cells + i`.
    terms: Vec<TermId>,
    local: Vec<u32>,
    roots: Vec<NodeId>,
}

type Domains = Vec<u32>;

impl<'a> FdModel<'a> {
    fn new(arena: &'a Arena, n: usize, arities: &'a [usize], roots: &[NodeId]) -> Result<Self, SolverHalt> {
        if n > 32 || n > MAX_DOMAIN {
            return Err(SolverHalt::ConstraintNotEncodable(format!("domain size {n} exceeds the bitset width")));
        }
        let mut cell_offset = Vec::with_capacity(arities.len());
        let mut num_cells = 0;
        for &a in arities {
            cell_offset.push(num_cells);
            num_cells += n.pow(a as u32);
        }
        let mut m = FdModel {
            arena,
            n,
            arities,
            cell_offset,
            num_cells,
            terms: Vec::new(),
            local: vec![u32::MAX; arena.num_terms()],
            roots: roots.to_vec(),
        };
        let mut seen = vec![false; arena.num_nodes()];
        for &r in roots {
            m.collect_node(r, &mut seen);
        }
        Ok(m)
    }

    fn collect_term(&mut self, t: TermId) {
        if self.local[t as usize] != u32::MAX {
            return;
        }
        if let GTerm::App(_, args) = self.arena.term(t) {
            for &a in args.clone().iter() {
                self.collect_term(a);
            }
        }
        self.local[t as usize] = self.terms.len() as u32;
        self.terms.push(t);
    }

    fn collect_node(&mut self, id: NodeId, seen: &mut [bool]) {
        if std::mem::replace(&mut seen[id as usize], true) {
            return;
        }
        match self.arena.node(id) {
            Node::True | Node::False => {}
            Node::Eq(a, b) | Node::Neq(a, b) => {
                self.collect_term(a);
                self.collect_term(b);
            }
            Node::And(s, l) | Node::Or(s, l) => {
                for &k in self.arena.kids(s, l) {
                    self.collect_node(k, seen);
                }
            }
        }
    }

    fn var(&self, t: TermId) -> usize {
        self.num_cells + self.local[t as usize] as usize
    }

    fn full(&self) -> u32 {
        if self.n == 32 {
            u32::MAX
        } else {
            (1u32 << self.n) - 1
        }
    }

    fn initial(&self) -> Domains {
        let mut d = vec![self.full(); self.num_cells + self.terms.len()];
        for &t in &self.terms {
            if let GTerm::Elem(e) = self.arena.term(t) {
                d[self.var(t)] = 1 << e.0;
            }
        }
        d
    }

    fn fixed(d: u32) -> Option<Elem> {
        (d.count_ones() == 1).then(|| Elem(d.trailing_zeros() as u8))
    }

    /// Cell variable of an application whose arguments are all fixed.
    /// Functor and tuple index of cell variable `c`.
    fn cell_at(&self, c: usize) -> (FunctorId, usize) {
        let f = self.cell_offset.iter().rposition(|&o| o <= c).expect("cell variable");
        (FunctorId(f as u32), c - self.cell_offset[f])
    }

    /// A referenced cell fixed by propagation but undefined in `table`.
    fn fixed_undefined(&self, dom: &Domains, table: &PreInterpretation) -> Option<usize> {
        self.terms.iter().filter_map(|&t| self.cell_of(dom, t)).find(|&c| {
            let (f, index) = self.cell_at(c);
            table.get_index(f, index).is_none()
        })
    }

    fn cell_of(&self, dom: &Domains, t: TermId) -> Option<usize> {
        let GTerm::App(f, args) = self.arena.term(t) else { return None };
        let mut idx = 0;
        for &a in args {
            idx = idx * self.n + Self::fixed(dom[self.var(a)])?.0 as usize;
        }
        Some(self.cell_offset[f.0 as usize] + idx)
    }

    fn status(&self, dom: &Domains, id: NodeId) -> Tri {
        match self.arena.node(id) {
            Node::True => Tri::True,
            Node::False => Tri::False,
            Node::Eq(a, b) | Node::Neq(a, b) => {
                let (x, y) = (dom[self.var(a)], dom[self.var(b)]);
                let eq = if x & y == 0 {
                    Tri::False
                } else if x == y && x.count_ones() == 1 {
                    Tri::True
                } else {
                    Tri::Unknown
                };
                match (self.arena.node(id), eq) {
                    (Node::Neq(..), Tri::True) => Tri::False,
                    (Node::Neq(..), Tri::False) => Tri::True,
                    _ => eq,
                }
            }
            Node::And(s, l) => {
                let mut out = Tri::True;
                for &k in self.arena.kids(s, l) {
                    match self.status(dom, k) {
                        Tri::False => return Tri::False,
                        Tri::Unknown => out = Tri::Unknown,
                        Tri::True => {}
                    }
                }
                out
            }
            Node::Or(s, l) => {
                let mut out = Tri::False;
                for &k in self.arena.kids(s, l) {
                    match self.status(dom, k) {
                        Tri::True => return Tri::True,
                        Tri::Unknown => out = Tri::Unknown,
                        Tri::False => {}
                    }
                }
                out
            }
        }
    }

    fn narrow(dom: &mut Domains, v: usize, mask: u32, changed: &mut bool) -> bool {
        let nd = dom[v] & mask;
        if nd != dom[v] {
            dom[v] = nd;
            *changed = true;
        }
        nd != 0
    }

    /// Enforces `id`; `false` on a wipe-out.
    fn require(&self, dom: &mut Domains, id: NodeId, changed: &mut bool) -> bool {
        match self.arena.node(id) {
            Node::True => true,
            Node::False => false,
            Node::Eq(a, b) => {
                let (va, vb) = (self.var(a), self.var(b));
                let m = dom[va] & dom[vb];
                Self::narrow(dom, va, m, changed) && Self::narrow(dom, vb, m, changed)
            }
            Node::Neq(a, b) => {
                let (va, vb) = (self.var(a), self.var(b));
                if dom[va].count_ones() == 1 && !Self::narrow(dom, vb, !dom[va], changed) {
                    return false;
                }
                if dom[vb].count_ones() == 1 && !Self::narrow(dom, va, !dom[vb], changed) {
                    return false;
                }
                true
            }
            Node::And(s, l) => self.arena.kids(s, l).iter().all(|&k| self.require(dom, k, changed)),
            Node::Or(s, l) => {
                let mut open = None;
                let mut count = 0;
                for &k in self.arena.kids(s, l) {
                    match self.status(dom, k) {
                        Tri::True => return true,
                        Tri::Unknown => {
                            count += 1;
                            open = Some(k);
                        }
                        Tri::False => {}
                    }
                }
                match count {
                    0 => false,
                    1 => self.require(dom, open.unwrap(), changed),
                    _ => true,
                }
            }
        }
    }

    /// Element constraints: each application equals its table cell.
    fn propagate_terms(&self, dom: &mut Domains, changed: &mut bool) -> bool {
        for &t in &self.terms {
            let GTerm::App(f, args) = self.arena.term(t) else { continue };
            let vt = self.var(t);
            if let Some(c) = self.cell_of(dom, t) {
                let m = dom[vt] & dom[c];
                if !Self::narrow(dom, vt, m, changed) || !Self::narrow(dom, c, m, changed) {
                    return false;
                }
            } else {
                let arity = args.len();
                let mut reach = 0u32;
                for idx in 0..self.n.pow(arity as u32) {
                    let tup = tuple_at(idx, arity, self.n);
                    if tup.iter().zip(args).all(|(e, &a)| dom[self.var(a)] >> e.0 & 1 == 1) {
                        reach |= dom[self.cell_offset[f.0 as usize] + idx];
                    }
                }
                if !Self::narrow(dom, vt, reach, changed) {
                    return false;
                }
            }
        }
        true
    }

    fn propagate(&self, dom: &mut Domains) -> bool {
        loop {
            let mut changed = false;
            if !self.propagate_terms(dom, &mut changed) {
                return false;
            }
            for &r in &self.roots {
                if !self.require(dom, r, &mut changed) {
                    return false;
                }
            }
            if !changed {
                return true;
            }
        }
    }

    /// First-fail: the unfixed referenced cell with the smallest domain.
    fn select(&self, dom: &Domains) -> Option<usize> {
        let mut best: Option<(u32, usize)> = None;
        for &t in &self.terms {
            if let Some(c) = self.cell_of(dom, t) {
                let size = dom[c].count_ones();
                if size > 1 && best.is_none_or(|b| (size, c) < b) {
                    best = Some((size, c));
                }
            }
        }
        best.map(|b| b.1)
    }

    fn search(&self, dom: Domains, backtracks: &mut u64, ticks: &mut u64, deadline: Option<Instant>) -> Result<Option<Domains>, SolverHalt> {
        *ticks += 1;
        if ticks.is_multiple_of(1024) && deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(SolverHalt::Timeout);
        }
        let mut dom = dom;
        if !self.propagate(&mut dom) {
            *backtracks += 1;
            return Ok(None);
        }
        let Some(c) = self.select(&dom) else {
            if self.roots.iter().all(|&r| self.status(&dom, r) == Tri::True) {
                return Ok(Some(dom));
            }
            *backtracks += 1;
            return Ok(None);
        };
        let mut bits = dom[c];
        while bits != 0 {
            let e = bits.trailing_zeros();
            bits &= bits - 1;
            let mut child = dom.clone();
            child[c] = 1 << e;
            if let Some(sol) = self.search(child, backtracks, ticks, deadline)? {
                return Ok(Some(sol));
            }
        }
        Ok(None)
    }

    fn cell_name(&self, c: usize, symbols: &Symbols) -> String {
        let f = self.cell_offset.iter().rposition(|&o| o <= c).unwrap();
        let tup = tuple_at(c - self.cell_offset[f], self.arities[f], self.n);
        let name = &symbols.functor_symbol(FunctorId(f as u32)).name;
        if tup.is_empty() {
            format!("J[{name}]")
        } else {
            format!("J[{name}({})]", tup.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(","))
        }
    }

    fn render(&self, symbols: &Symbols) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "% domain {} (values 0..{})", self.n, self.n - 1);
        let _ = writeln!(out, "% cells");
        for c in 0..self.num_cells {
            let _ = writeln!(out, "var C{c} in 0..{}  % {}", self.n - 1, self.cell_name(c, symbols));
        }
        let _ = writeln!(out, "% terms");
        for (i, &t) in self.terms.iter().enumerate() {
            let v = format!("T{i}");
            match self.arena.term(t) {
                GTerm::Elem(e) => {
                    let _ = writeln!(out, "var {v} = {}", e.0);
                }
                GTerm::App(f, args) => {
                    let a: Vec<String> = args.iter().map(|&x| format!("T{}", self.local[x as usize])).collect();
                    let base = self.cell_offset[f.0 as usize];
                    let _ = writeln!(
                        out,
                        "var {v} in 0..{}  % {}\nelement({v}, C{}.., [{}])",
                        self.n - 1,
                        self.arena.render_term(t, symbols),
                        base,
                        a.join(",")
                    );
                }
            }
        }
        let _ = writeln!(out, "% formulas");
        for &r in &self.roots {
            let _ = writeln!(out, "post {}", self.render_node(r));
        }
        out
    }

    fn render_node(&self, id: NodeId) -> String {
        let t = |x: TermId| format!("T{}", self.local[x as usize]);
        match self.arena.node(id) {
            Node::True => "true".into(),
            Node::False => "false".into(),
            Node::Eq(a, b) => format!("{} = {}", t(a), t(b)),
            Node::Neq(a, b) => format!("{} != {}", t(a), t(b)),
            Node::And(s, l) | Node::Or(s, l) => {
                let sep = if matches!(self.arena.node(id), Node::And(..)) { " & " } else { " | " };
                let parts: Vec<String> = self.arena.kids(s, l).iter().map(|&k| self.render_node(k)).collect();
                format!("({})", parts.join(sep))
            }
        }
    }
}

impl FdSolver {
    pub fn new(n: usize, arities: Vec<usize>) -> Self {
        FdSolver { n, arities, roots: Vec::new(), solution: None }
    }

    pub fn post(&mut self, root: NodeId) {
        self.roots.push(root);
    }

    pub fn roots(&self) -> &[NodeId] {
        &self.roots
    }

    pub fn check(&mut self, arena: &Arena, deadline: Option<Instant>) -> Result<(bool, u64), SolverHalt> {
        let model = FdModel::new(arena, self.n, &self.arities, &self.roots)?;
        let mut backtracks = 0;
        let mut ticks = 0;
        match model.search(model.initial(), &mut backtracks, &mut ticks, deadline)? {
            None => {
                self.solution = None;
                Ok((false, backtracks))
            }
            Some(dom) => {
                let mut j = PreInterpretation::new(self.n, self.arities.clone());
                for &t in &model.terms {
                    if let Some(c) = model.cell_of(&dom, t) {
                        let GTerm::App(f, _) = arena.term(t) else { unreachable!() };
                        let idx = c - model.cell_offset[f.0 as usize];
                        j.set_index(*f, idx, FdModel::fixed(dom[c]));
                    }
                }
                self.solution = Some(j);
                Ok((true, backtracks))
            }
        }
    }

    /// Table found by the last successful check.
    pub fn witness(&self) -> Option<&PreInterpretation> {
        self.solution.as_ref()
    }

    /// Text rendering of the finite-domain model of the current store.
    pub fn render_encoding(&self, arena: &Arena, symbols: &Symbols) -> Result<String, SolverHalt> {
        Ok(FdModel::new(arena, self.n, &self.arities, &self.roots)?.render(symbols))
    }
}

/// Either back end behind one interface.
#[derive(Debug, Clone)]
pub enum Backend {
    Abductive(AbductiveSolver),
    Fd(FdSolver),
}

impl Backend {
    pub fn new(kind: SolverKind, n: usize, arities: Vec<usize>, intelligent: bool, symmetry: bool) -> Self {
        match kind {
            SolverKind::Abductive => Backend::Abductive(AbductiveSolver::new(n, arities, intelligent, symmetry)),
            SolverKind::Fd => Backend::Fd(FdSolver::new(n, arities)),
        }
    }

    pub fn post(&mut self, root: NodeId) {
        match self {
            Backend::Abductive(s) => s.post(root),
            Backend::Fd(s) => s.post(root),
        }
    }

    pub fn roots(&self) -> &[NodeId] {
        match self {
            Backend::Abductive(s) => s.roots(),
            Backend::Fd(s) => s.roots(),
        }
    }

    pub fn check(&mut self, arena: &Arena, deadline: Option<Instant>) -> Result<(bool, u64), SolverHalt> {
        match self {
            Backend::Abductive(s) => s.check(arena, deadline),
            Backend::Fd(s) => s.check(arena, deadline),
        }
    }

    /// Partial table satisfying the store; call after a successful check.
    pub fn witness(&self, n: usize, arities: &[usize]) -> PreInterpretation {
        match self {
            Backend::Abductive(s) => s.witness().clone(),
            Backend::Fd(s) => s.witness().cloned().unwrap_or_else(|| PreInterpretation::new(n, arities.to_vec())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::holds;

    const ZERO: FunctorId = FunctorId(0);
    const S: FunctorId = FunctorId(1);

    /// s(zero) != zero, s(s(zero)) = zero, s(zero) != s(s(s(zero)))... built by hand.
    fn parity_store(a: &mut Arena) -> Vec<NodeId> {
        let z = a.app(ZERO, &[]);
        let sz = a.app(S, &[z]);
        let ssz = a.app(S, &[sz]);
        vec![a.neq(sz, z), a.eq(ssz, z)]
    }

    fn both(n: usize) -> Vec<Backend> {
        vec![
            Backend::new(SolverKind::Abductive, n, vec![0, 1], true, true),
            Backend::new(SolverKind::Abductive, n, vec![0, 1], false, false),
            Backend::new(SolverKind::Fd, n, vec![0, 1], false, false),
        ]
    }

    #[test]
    fn satisfiable_store() {
        let mut a = Arena::default();
        let roots = parity_store(&mut a);
        for mut b in both(2) {
            for &r in &roots {
                b.post(r);
            }
            assert!(b.check(&a, None).unwrap().0);
            let j = b.witness(2, &[0, 1]).completed();
            assert!(roots.iter().all(|&r| holds(&a, r, &j)));
        }
    }

    #[test]
    fn unsatisfiable_store() {
        let mut a = Arena::default();
        let mut roots = parity_store(&mut a);
        // additionally s(d0) = d0 and s(d1) = d1: s is the identity
        for e in 0..2 {
            let d = a.elem(Elem(e));
            let sd = a.app(S, &[d]);
            roots.push(a.eq(sd, d));
        }
        for mut b in both(2) {
            for &r in &roots {
                b.post(r);
            }
            assert!(!b.check(&a, None).unwrap().0);
        }
    }

    #[test]
    fn incremental_checks_revise_the_table() {
        let mut a = Arena::default();
        let z = a.app(ZERO, &[]);
        let sz = a.app(S, &[z]);
        let d0 = a.elem(Elem(0));
        let first = a.eq(sz, z);
        let second = a.neq(sz, d0);
        // `second` mentions d0, so the store is not symmetric: no value cut.
        let mut s = AbductiveSolver::new(3, vec![0, 1], true, false);
        s.post(first);
        assert!(s.check(&a, None).unwrap().0);
        s.post(second);
        let (ok, _) = s.check(&a, None).unwrap();
        assert!(ok);
        let j = s.witness().clone().completed();
        assert!(holds(&a, first, &j) && holds(&a, second, &j));
    }
}
