//! Constraint-based search for a failing pre-interpretation.
//!
//! Abducibles are never resolved. Instead the tabled evaluation carries
//! them symbolically in clause bodies, and conditions on the unknown
//! function table are posted to a constraint store:
//!
//! * a derived `false <- abducibles` posts that the abducibles never hold
//!   together;
//! * a derived fact `p(X) <- abducibles` is a choice point: either it is
//!   subsumed by the answers of `p` found so far (post that, drop the
//!   fact), or it is not (post that, and it becomes a new answer).
//!
//! The store is checked after every posting; an inconsistent store
//! backtracks to the most recent subsumption choice point. When every fact
//! has been decided the solver's table is a solution.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::abstraction::AbstractProgram;
use crate::clause::{resolve_call, Arg, EClause, Head, Lit, Subst};
use crate::encoding::{falsity, not_subsumed, subsumed, Arena, ArenaMark, EncodingError, NodeId};
use crate::search::{Outcome, SearchOptions, SearchResult, SearchStats, SeedOrder};
use crate::solvers::{Backend, SolverHalt, SolverKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstraintError {
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error("constraint not encodable: {0}")]
    NotEncodable(String),
}

/// Searches for a pre-interpretation of size `n` under which the query of
/// `ap` fails, checking the constraint store with `solver`.
pub fn solve(ap: &AbstractProgram, n: usize, opts: &SearchOptions, solver: SolverKind) -> Result<SearchResult, ConstraintError> {
    let mut engine = Engine::new(ap, n, opts, solver);
    let outcome = engine.run()?;
    Ok(SearchResult { outcome, stats: engine.stats })
}

/// Like [`solve`], also returning the finite-domain model of the final store.
pub fn solve_with_encoding(ap: &AbstractProgram, n: usize, opts: &SearchOptions) -> Result<(SearchResult, String), ConstraintError> {
    let mut engine = Engine::new(ap, n, opts, SolverKind::Fd);
    let outcome = engine.run()?;
    let text = match &engine.backend {
        Backend::Fd(fd) => fd.render_encoding(&engine.arena, &ap.symbols).map_err(|h| match Halt::from(h) {
            Halt::Error(e) => e,
            _ => unreachable!("rendering never times out"),
        })?,
        Backend::Abductive(_) => unreachable!(),
    };
    Ok((SearchResult { outcome, stats: engine.stats }, text))
}

/// Merges abducibles with the same functor and inputs (their outputs are
/// equal, the table being a function), drops duplicates and drops
/// abducibles whose output occurs nowhere else (a total table always
/// satisfies them). `None` when merging equates two distinct elements.
pub fn normalize(c: EClause) -> Option<EClause> {
    let mut s = Subst::new(c.nvars as usize);
    loop {
        let mut changed = false;
        for i in 0..c.body.len() {
            let Lit::Abd(f, a) = &c.body[i] else { continue };
            for l in &c.body[i + 1..] {
                let Lit::Abd(g, b) = l else { continue };
                if f != g {
                    continue;
                }
                let k = a.len() - 1;
                if (0..k).all(|x| s.walk(a[x]) == s.walk(b[x])) && s.walk(a[k]) != s.walk(b[k]) {
                    if !s.unify(a[k], b[k]) {
                        return None;
                    }
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let head = match &c.head {
        Head::False => Head::False,
        Head::Atom(p, a) => Head::Atom(*p, s.apply(a)),
    };
    let mut body: Vec<Lit> = Vec::with_capacity(c.body.len());
    for l in &c.body {
        let l = match l {
            Lit::Call(p, a) => Lit::Call(*p, s.apply(a)),
            Lit::Abd(f, a) => Lit::Abd(*f, s.apply(a)),
        };
        if matches!(l, Lit::Abd(..)) && body.contains(&l) {
            continue;
        }
        body.push(l);
    }
    loop {
        let mut count = vec![0u32; c.nvars as usize];
        let mut tally = |a: &Arg| {
            if let Arg::Var(v) = a {
                count[*v as usize] += 1;
            }
        };
        if let Head::Atom(_, a) = &head {
            a.iter().for_each(&mut tally);
        }
        body.iter().for_each(|l| l.args().iter().for_each(&mut tally));
        let dead = body.iter().position(|l| match l {
            Lit::Abd(_, a) => matches!(a.last(), Some(Arg::Var(v)) if count[*v as usize] == 1),
            Lit::Call(..) => false,
        });
        match dead {
            Some(i) => {
                body.remove(i);
            }
            None => break,
        }
    }
    Some(EClause { head, body, nvars: c.nvars }.canonical())
}

enum Undo {
    Tabled(u32),
    Answer(u32),
    Suspended(u32),
}

enum Halt {
    Fail,
    Timeout,
    Error(ConstraintError),
}

impl From<SolverHalt> for Halt {
    fn from(h: SolverHalt) -> Self {
        match h {
            SolverHalt::Timeout => Halt::Timeout,
            SolverHalt::ConstraintNotEncodable(m) => Halt::Error(ConstraintError::NotEncodable(m)),
        }
    }
}

impl From<EncodingError> for Halt {
    fn from(e: EncodingError) -> Self {
        Halt::Error(e.into())
    }
}

struct ChoicePoint {
    clauses: usize,
    undo: usize,
    arena: ArenaMark,
    pending: VecDeque<u32>,
    backend: Backend,
    fact: u32,
    /// Whether the "not subsumed" branch has been taken.
    second: bool,
}

struct Engine<'a> {
    ap: &'a AbstractProgram,
    n: usize,
    opts: &'a SearchOptions,
    program: Vec<EClause>,
    clauses: Vec<EClause>,
    keys: HashMap<Box<[u32]>, u32>,
    key_of: Vec<Box<[u32]>>,
    tabled: Vec<bool>,
    answers: Vec<Vec<u32>>,
    suspended: Vec<Vec<(u32, u16)>>,
    undo: Vec<Undo>,
    queue: VecDeque<u32>,
    pending: VecDeque<u32>,
    arena: Arena,
    backend: Backend,
    stack: Vec<ChoicePoint>,
    stats: SearchStats,
    ticks: u32,
}

impl<'a> Engine<'a> {
    fn new(ap: &'a AbstractProgram, n: usize, opts: &'a SearchOptions, solver: SolverKind) -> Self {
        Engine {
            ap,
            n,
            opts,
            program: ap.clauses.iter().map(EClause::from_clause).collect(),
            clauses: Vec::new(),
            keys: HashMap::new(),
            key_of: Vec::new(),
            tabled: vec![false; ap.num_preds()],
            answers: vec![Vec::new(); ap.num_preds()],
            suspended: vec![Vec::new(); ap.num_preds()],
            undo: Vec::new(),
            queue: VecDeque::new(),
            pending: VecDeque::new(),
            arena: Arena::default(),
            backend: Backend::new(solver, n, ap.arities(), opts.intelligent_backtracking, opts.symmetry),
            stack: Vec::new(),
            stats: SearchStats::default(),
            ticks: 0,
        }
    }

    fn run(&mut self) -> Result<Outcome, ConstraintError> {
        let query = EClause::from_query(&self.ap.query);
        let mut status = self.add(query).and_then(|()| self.propagate());
        loop {
            status = match status {
                Err(Halt::Error(e)) => return Err(e),
                Err(Halt::Timeout) => return Ok(Outcome::Timeout),
                Err(Halt::Fail) => match self.backtrack() {
                    None => return Ok(Outcome::Exhausted),
                    Some(s) => s,
                },
                Ok(()) => {
                    let Some(fact) = self.pending.pop_front() else {
                        let arities = self.ap.arities();
                        return Ok(Outcome::Solution(self.backend.witness(self.n, &arities)));
                    };
                    self.stack.push(ChoicePoint {
                        clauses: self.clauses.len(),
                        undo: self.undo.len(),
                        arena: self.arena.mark(),
                        pending: self.pending.clone(),
                        backend: self.backend.clone(),
                        fact,
                        second: false,
                    });
                    self.stats.max_depth = self.stats.max_depth.max(self.stack.len() as u64);
                    match self.try_subsumed(fact) {
                        Err(Halt::Fail) => {
                            // Rejected at its own posting: not a backtrack.
                            self.restore_top();
                            self.stack.last_mut().unwrap().second = true;
                            self.try_not_subsumed(fact)
                        }
                        other => other,
                    }
                }
            };
        }
    }

    /// Resumes at the most recent choice point with an untried branch.
    fn backtrack(&mut self) -> Option<Result<(), Halt>> {
        loop {
            let cp = self.stack.last()?;
            let (second, fact) = (cp.second, cp.fact);
            self.restore_top();
            if second {
                self.stack.pop();
                continue;
            }
            self.stats.backtracks += 1;
            self.stats.rule5_backtracks += 1;
            self.stack.last_mut().unwrap().second = true;
            return Some(self.try_not_subsumed(fact));
        }
    }

    fn restore_top(&mut self) {
        let cp = self.stack.last().unwrap();
        while self.undo.len() > cp.undo {
            match self.undo.pop().unwrap() {
                Undo::Tabled(p) => self.tabled[p as usize] = false,
                Undo::Answer(p) => {
                    self.answers[p as usize].pop();
                }
                Undo::Suspended(p) => {
                    self.suspended[p as usize].pop();
                }
            }
        }
        for k in self.key_of.drain(cp.clauses..) {
            self.keys.remove(&k);
        }
        self.clauses.truncate(cp.clauses);
        self.arena.truncate(cp.arena);
        self.pending = cp.pending.clone();
        self.backend = cp.backend.clone();
        self.queue.clear();
    }

    fn post(&mut self, root: NodeId) -> Result<(), Halt> {
        self.backend.post(root);
        let (ok, bt) = self.backend.check(&self.arena, self.opts.deadline)?;
        self.stats.solver_backtracks += bt;
        if ok {
            Ok(())
        } else {
            Err(Halt::Fail)
        }
    }

    fn answer_clauses(&self, p: u32) -> Vec<EClause> {
        self.answers[p as usize].iter().map(|&a| self.clauses[a as usize].clone()).collect()
    }

    fn try_subsumed(&mut self, fact: u32) -> Result<(), Halt> {
        let c = self.clauses[fact as usize].clone();
        let Head::Atom(p, _) = c.head else { unreachable!() };
        let answers = self.answer_clauses(p.0);
        let root = subsumed(&mut self.arena, &c, &answers, self.n)?;
        self.post(root)
    }

    fn try_not_subsumed(&mut self, fact: u32) -> Result<(), Halt> {
        let c = self.clauses[fact as usize].clone();
        let Head::Atom(p, args) = &c.head else { unreachable!() };
        let p = p.0;
        // A predicate of arity m has at most n^m distinct answers.
        let bound = (self.n as u64).saturating_pow(args.len() as u32);
        if self.answers[p as usize].len() as u64 >= bound {
            return Err(Halt::Fail);
        }
        let answers = self.answer_clauses(p);
        let root = not_subsumed(&mut self.arena, &c, &answers, self.n)?;
        self.post(root)?;
        self.answers[p as usize].push(fact);
        self.undo.push(Undo::Answer(p));
        let waiting = self.suspended[p as usize].clone();
        for (id, at) in waiting {
            let sus = self.clauses[id as usize].clone();
            if let Some(r) = resolve_call(&sus, at as usize, &c) {
                self.add(r)?;
            }
        }
        self.propagate()
    }

    fn add(&mut self, c: EClause) -> Result<(), Halt> {
        let Some(c) = normalize(c) else { return Ok(()) };
        let key = c.key();
        if self.keys.contains_key(&key) {
            return Ok(());
        }
        let id = self.clauses.len() as u32;
        self.keys.insert(key.clone(), id);
        self.key_of.push(key);
        self.clauses.push(c);
        self.stats.clauses += 1;
        match self.opts.seed_order {
            SeedOrder::Fifo => self.queue.push_back(id),
            SeedOrder::Lifo => self.queue.push_front(id),
        }
        Ok(())
    }

    fn propagate(&mut self) -> Result<(), Halt> {
        while let Some(id) = self.queue.pop_front() {
            self.ticks = self.ticks.wrapping_add(1);
            if self.ticks.is_multiple_of(256) && self.opts.expired() {
                return Err(Halt::Timeout);
            }
            self.process(id)?;
        }
        Ok(())
    }

    fn process(&mut self, id: u32) -> Result<(), Halt> {
        let c = self.clauses[id as usize].clone();
        if let Some(at) = c.body.iter().position(Lit::is_call) {
            let Lit::Call(p, _) = &c.body[at] else { unreachable!() };
            let p = p.0;
            if !self.tabled[p as usize] {
                self.tabled[p as usize] = true;
                self.undo.push(Undo::Tabled(p));
                for &ci in &self.ap.by_pred[p as usize] {
                    let pc = self.program[ci].clone();
                    self.add(pc)?;
                }
            }
            self.suspended[p as usize].push((id, at as u16));
            self.undo.push(Undo::Suspended(p));
            for a in self.answer_clauses(p) {
                if let Some(r) = resolve_call(&c, at, &a) {
                    self.add(r)?;
                }
            }
            return Ok(());
        }
        match c.head {
            Head::False => {
                let root = falsity(&mut self.arena, &c, self.n)?;
                self.post(root)
            }
            Head::Atom(..) => {
                self.pending.push_back(id);
                Ok(())
            }
        }
    }
}
