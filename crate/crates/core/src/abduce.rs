//! Abductive search for a failing pre-interpretation.
//!
//! The abstracted program is evaluated top-down with tabling at the most
//! general call (every predicate is tabled). Abducibles `p_f(..)` are
//! resolved only against function-table entries that have already been
//! chosen; when evaluation gets stuck on abducibles, an entry is chosen
//! (a choice point over domain values) and evaluation resumes. Deriving
//! `false` from the query refutes the current choices.
//!
//! Inference steps on tabled clauses:
//! * tabling: the first call to a predicate adds its program clauses;
//! * answer resolution: a call is resolved against every answer (fact) of
//!   its predicate, now and in the future;
//! * abducible resolution: an abducible whose instances are all decided is
//!   replaced by its resolvents with those entries, consuming the clause;
//! * abduction: choose the value of one missing entry;
//! * failure: a derived `false` is a conflict.

use std::collections::{HashMap, VecDeque};
use smallvec::SmallVec;

use crate::abstraction::AbstractProgram;
use crate::clause::{head_subsumes, input_instances, resolve_abd, resolve_call, EClause, Head, Lit};
use crate::conflict::{symmetry_reject, ConflictSet, GeneratorRecord, SYMMETRY_MAX_DOMAIN};
use crate::preinterp::{tuple_index, Component, Elem, Permutation, PreInterpretation, Tuple};
use crate::search::{Outcome, SearchOptions, SearchResult, SearchStats, SeedOrder};
use crate::syntax::FunctorId;

/// Searches for a pre-interpretation of size `n` under which the query of
/// `ap` fails.
pub fn solve(ap: &AbstractProgram, n: usize, opts: &SearchOptions) -> SearchResult {
    let mut engine = Engine::new(ap, n, opts);
    let outcome = engine.run();
    SearchResult { outcome, stats: engine.stats }
}

enum Halt {
    Conflict(ConflictSet),
    Timeout,
}

struct Stored {
    clause: EClause,
    prov: ConflictSet,
    key: Box<[u32]>,
}

enum Undo {
    Consumed(u32),
    Tabled(u32),
    Cell(FunctorId, usize),
}

#[derive(Clone, Copy)]
struct Mark {
    clauses: usize,
    delayed: usize,
    undo: usize,
}

struct Choice {
    functor: FunctorId,
    index: usize,
    inputs: Tuple,
    candidates: SmallVec<[Elem; 8]>,
    next: usize,
    current: Option<Elem>,
    mark: Mark,
    record: GeneratorRecord,
    /// Refuted assignments as component sets, for isomorphic rejection.
    refuted: Vec<Vec<Component>>,
}

struct Engine<'a> {
    ap: &'a AbstractProgram,
    n: usize,
    opts: &'a SearchOptions,
    program: Vec<EClause>,
    clauses: Vec<Stored>,
    keys: HashMap<Box<[u32]>, u32>,
    consumed: Vec<bool>,
    tabled: Vec<bool>,
    answers: Vec<Vec<u32>>,
    suspended: Vec<Vec<(u32, u16)>>,
    delayed: Vec<u32>,
    delayed_by_functor: Vec<Vec<u32>>,
    table: PreInterpretation,
    cell_depth: Vec<Vec<u32>>,
    undo: Vec<Undo>,
    queue: VecDeque<u32>,
    stack: Vec<Choice>,
    perms: Vec<Permutation>,
    stats: SearchStats,
    ticks: u32,
}

impl<'a> Engine<'a> {
    fn new(ap: &'a AbstractProgram, n: usize, opts: &'a SearchOptions) -> Self {
        let table = PreInterpretation::for_symbols(n, &ap.symbols);
        let cell_depth = table.arities().iter().map(|&k| vec![0; n.pow(k as u32)]).collect();
        let perms = if opts.symmetry && n <= SYMMETRY_MAX_DOMAIN { Permutation::all(n) } else { Vec::new() };
        Engine {
            ap,
            n,
            opts,
            program: ap.clauses.iter().map(EClause::from_clause).collect(),
            clauses: Vec::new(),
            keys: HashMap::new(),
            consumed: Vec::new(),
            tabled: vec![false; ap.num_preds()],
            answers: vec![Vec::new(); ap.num_preds()],
            suspended: vec![Vec::new(); ap.num_preds()],
            delayed: Vec::new(),
            delayed_by_functor: vec![Vec::new(); ap.symbols.num_functors()],
            table,
            cell_depth,
            undo: Vec::new(),
            queue: VecDeque::new(),
            stack: Vec::new(),
            perms,
            stats: SearchStats::default(),
            ticks: 0,
        }
    }

    fn run(&mut self) -> Outcome {
        let query = EClause::from_query(&self.ap.query);
        let mut status = self.add(query, ConflictSet::empty()).and_then(|()| self.propagate());
        loop {
            match status {
                Err(Halt::Timeout) => return Outcome::Timeout,
                Err(Halt::Conflict(c)) => {
                    self.stats.primary_conflicts += 1;
                    match self.backjump(c) {
                        Ok(()) => {}
                        Err(Halt::Timeout) => return Outcome::Timeout,
                        Err(Halt::Conflict(_)) => return Outcome::Exhausted,
                    }
                }
                Ok(()) => {}
            }
            let Some((functor, index, inputs)) = self.select_abduction() else {
                return Outcome::Solution(self.table.clone());
            };
            let candidates = self.candidates(&inputs);
            let mark = self.mark();
            self.stack.push(Choice {
                functor,
                index,
                inputs,
                candidates,
                next: 0,
                current: None,
                mark,
                record: GeneratorRecord::default(),
                refuted: Vec::new(),
            });
            self.stats.max_depth = self.stats.max_depth.max(self.stack.len() as u64);
            status = self.try_values();
        }
    }

    fn mark(&self) -> Mark {
        Mark { clauses: self.clauses.len(), delayed: self.delayed.len(), undo: self.undo.len() }
    }

    /// The conflict that decides where to resume.
    fn effective(&self, c: &ConflictSet) -> ConflictSet {
        if self.opts.intelligent_backtracking || c.is_empty() {
            c.clone()
        } else {
            ConflictSet::prefix(self.stack.len())
        }
    }

    /// Handles a conflict: resumes at the deepest responsible choice point
    /// with its next value. `Err(Conflict)` means the space is exhausted.
    fn backjump(&mut self, mut c: ConflictSet) -> Result<(), Halt> {
        loop {
            let eff = self.effective(&c);
            let Some(t) = eff.max() else { return Err(Halt::Conflict(c)) };
            self.stats.backtracks += 1;
            while self.stack.len() > t + 1 {
                let ch = self.stack.pop().unwrap();
                self.restore(ch.mark);
            }
            let mark = self.stack[t].mark;
            self.restore(mark);
            self.refute(t, &c);
            match self.try_values() {
                Ok(()) => return Ok(()),
                Err(Halt::Conflict(c2)) => c = c2,
                Err(Halt::Timeout) => return Err(Halt::Timeout),
            }
        }
    }

    /// Records that the current value of choice `d` is refuted by `c`.
    fn refute(&mut self, d: usize, c: &ConflictSet) {
        let ch = &self.stack[d];
        let value = ch.current.expect("refuting a choice without a value");
        if !self.perms.is_empty() {
            let comps: Vec<Component> = c.iter().filter(|&x| x != d).map(|x| self.component_at(x)).chain(std::iter::once(Component {
                functor: ch.functor,
                inputs: ch.inputs.clone(),
                output: value,
            }))
            .collect();
            self.stack[d].refuted.push(comps);
        }
        let rest = self.effective(c).without(d);
        self.stack[d].record.record(value, rest);
        self.stack[d].current = None;
    }

    fn component_at(&self, d: usize) -> Component {
        let ch = &self.stack[d];
        Component { functor: ch.functor, inputs: ch.inputs.clone(), output: ch.current.expect("conflict mentions an unset choice") }
    }

    /// Tries the remaining values of the top choice point. On exhaustion the
    /// choice point is popped and the secondary conflict returned.
    fn try_values(&mut self) -> Result<(), Halt> {
        let d = self.stack.len() - 1;
        loop {
            let ch = &mut self.stack[d];
            let Some(&v) = ch.candidates.get(ch.next) else { break };
            ch.next += 1;
            ch.current = Some(v);
            if let Some(c) = self.isomorphic_conflict(d, v) {
                self.stats.symmetry_rejections += 1;
                self.refute(d, &c);
                continue;
            }
            self.stats.abductions += 1;
            let (f, idx) = (self.stack[d].functor, self.stack[d].index);
            self.table.set_index(f, idx, Some(v));
            self.cell_depth[f.0 as usize][idx] = d as u32;
            self.undo.push(Undo::Cell(f, idx));
            match self.wake(f).and_then(|()| self.propagate()) {
                Ok(()) => return Ok(()),
                Err(Halt::Timeout) => return Err(Halt::Timeout),
                Err(Halt::Conflict(c)) => {
                    self.stats.primary_conflicts += 1;
                    let eff = self.effective(&c);
                    if eff.max() == Some(d) {
                        self.stats.backtracks += 1;
                        let mark = self.stack[d].mark;
                        self.restore(mark);
                        self.refute(d, &c);
                    } else {
                        return Err(Halt::Conflict(c));
                    }
                }
            }
        }
        let ch = self.stack.pop().unwrap();
        self.restore(ch.mark);
        self.stats.secondary_conflicts += 1;
        let sec = ch.record.secondary_conflict();
        Err(Halt::Conflict(if self.opts.intelligent_backtracking || sec.is_empty() {
            sec
        } else {
            ConflictSet::prefix(self.stack.len())
        }))
    }

    /// If assigning `v` at depth `d` completes an image of a refuted
    /// assignment under some domain permutation, the depths of that image.
    fn isomorphic_conflict(&self, d: usize, v: Elem) -> Option<ConflictSet> {
        if self.perms.is_empty() {
            return None;
        }
        let cur = &self.stack[d];
        let lookup = |c: &Component| {
            if c.functor == cur.functor && c.inputs == cur.inputs {
                c.output == v
            } else {
                self.table.get(c.functor, &c.inputs) == Some(c.output)
            }
        };
        for level in &self.stack[..=d] {
            for refuted in &level.refuted {
                if let Some(image) = symmetry_reject(refuted, &lookup, &self.perms) {
                    let mut c = ConflictSet::singleton(d);
                    for comp in &image {
                        if comp.functor != cur.functor || comp.inputs != cur.inputs {
                            let idx = tuple_index(&comp.inputs, self.n);
                            c.insert(self.cell_depth[comp.functor.0 as usize][idx] as usize);
                        }
                    }
                    return Some(c);
                }
            }
        }
        None
    }

    /// Values to try for a new entry with the given inputs: elements already
    /// mentioned by the chosen entries or the inputs, plus one fresh element.
    fn candidates(&self, inputs: &[Elem]) -> SmallVec<[Elem; 8]> {
        if !self.opts.symmetry {
            return (0..self.n as u8).map(Elem).collect();
        }
        let mut used = vec![false; self.n];
        for &e in inputs {
            used[e.0 as usize] = true;
        }
        for ch in &self.stack {
            for &e in &ch.inputs {
                used[e.0 as usize] = true;
            }
            if let Some(e) = ch.current {
                used[e.0 as usize] = true;
            }
        }
        let mut out: SmallVec<[Elem; 8]> = SmallVec::new();
        let mut fresh = false;
        for (i, &u) in used.iter().enumerate() {
            if u || !fresh {
                out.push(Elem(i as u8));
                fresh |= !u;
            }
        }
        out
    }

    fn restore(&mut self, m: Mark) {
        while self.undo.len() > m.undo {
            match self.undo.pop().unwrap() {
                Undo::Consumed(c) => self.consumed[c as usize] = false,
                Undo::Tabled(p) => self.tabled[p as usize] = false,
                Undo::Cell(f, idx) => self.table.set_index(f, idx, None),
            }
        }
        for s in self.clauses.drain(m.clauses..) {
            self.keys.remove(&s.key);
        }
        self.consumed.truncate(m.clauses);
        let limit = m.clauses as u32;
        for list in &mut self.answers {
            while list.last().is_some_and(|&c| c >= limit) {
                list.pop();
            }
        }
        for list in &mut self.suspended {
            while list.last().is_some_and(|&(c, _)| c >= limit) {
                list.pop();
            }
        }
        self.delayed.truncate(m.delayed);
        for list in &mut self.delayed_by_functor {
            while list.last().is_some_and(|&c| c >= limit) {
                list.pop();
            }
        }
        self.queue.clear();
    }

    fn add(&mut self, clause: EClause, prov: ConflictSet) -> Result<(), Halt> {
        let key = clause.key();
        if self.keys.contains_key(&key) {
            return Ok(());
        }
        if clause.head == Head::False && clause.body.is_empty() {
            return Err(Halt::Conflict(prov));
        }
        let id = self.clauses.len() as u32;
        self.keys.insert(key.clone(), id);
        self.clauses.push(Stored { clause, prov, key });
        self.consumed.push(false);
        self.queue.push_back(id);
        self.stats.clauses += 1;
        Ok(())
    }

    fn propagate(&mut self) -> Result<(), Halt> {
        loop {
            let next = match self.opts.seed_order {
                SeedOrder::Fifo => self.queue.pop_front(),
                SeedOrder::Lifo => self.queue.pop_back(),
            };
            let Some(id) = next else { return Ok(()) };
            self.ticks += 1;
            if self.ticks.is_multiple_of(1024) && self.opts.expired() {
                return Err(Halt::Timeout);
            }
            self.process(id)?;
        }
    }

    /// Index of the covered abducible with the fewest instances, if any.
    fn covered_abducible(&self, c: &EClause) -> Option<(usize, Vec<Tuple>)> {
        let mut best: Option<(usize, Vec<Tuple>)> = None;
        for (i, l) in c.body.iter().enumerate() {
            let Lit::Abd(f, args) = l else { continue };
            let inst = input_instances(args, self.n);
            if best.as_ref().is_some_and(|(_, b)| b.len() <= inst.len()) {
                continue;
            }
            if inst.iter().all(|t| self.table.get(*f, t).is_some()) {
                best = Some((i, inst));
            }
        }
        best
    }

    /// Replaces clause `id` by its resolvents on a covered abducible.
    fn resolve_covered(&mut self, id: u32, at: usize, instances: Vec<Tuple>) -> Result<(), Halt> {
        let Lit::Abd(f, _) = self.clauses[id as usize].clause.body[at] else { unreachable!() };
        for inputs in instances {
            let idx = tuple_index(&inputs, self.n);
            let out = self.table.get_index(f, idx).unwrap();
            let mut values: Tuple = inputs;
            values.push(out);
            let stored = &self.clauses[id as usize];
            if let Some(r) = resolve_abd(&stored.clause, at, &values) {
                let mut prov = stored.prov.clone();
                prov.insert(self.cell_depth[f.0 as usize][idx] as usize);
                self.add(r, prov)?;
            }
        }
        Ok(())
    }

    fn process(&mut self, id: u32) -> Result<(), Halt> {
        let clause = &self.clauses[id as usize].clause;
        if clause.body.is_empty() {
            let Head::Atom(p, args) = &clause.head else { unreachable!("false facts are conflicts") };
            let p = p.0 as usize;
            let subsumed = self.answers[p].iter().any(|&a| {
                let ans = &self.clauses[a as usize].clause;
                head_subsumes(ans.head_args(), args, ans.nvars)
            });
            if subsumed {
                return Ok(());
            }
            self.answers[p].push(id);
            for k in 0..self.suspended[p].len() {
                let (s, at) = self.suspended[p][k];
                self.resolve_with_answer(s, at as usize, id)?;
            }
            return Ok(());
        }
        if let Some((at, inst)) = self.covered_abducible(clause) {
            return self.resolve_covered(id, at, inst);
        }
        if let Some(at) = clause.body.iter().position(Lit::is_call) {
            let Lit::Call(p, _) = clause.body[at] else { unreachable!() };
            let p = p.0 as usize;
            if !self.tabled[p] {
                self.tabled[p] = true;
                self.undo.push(Undo::Tabled(p as u32));
                for &ci in &self.ap.by_pred[p] {
                    self.add(self.program[ci].clone(), ConflictSet::empty())?;
                }
            }
            self.suspended[p].push((id, at as u16));
            for k in 0..self.answers[p].len() {
                let a = self.answers[p][k];
                self.resolve_with_answer(id, at, a)?;
            }
            return Ok(());
        }
        self.delayed.push(id);
        let mut seen: SmallVec<[FunctorId; 8]> = SmallVec::new();
        for l in &self.clauses[id as usize].clause.body {
            if let Lit::Abd(f, _) = l {
                if !seen.contains(f) {
                    seen.push(*f);
                    self.delayed_by_functor[f.0 as usize].push(id);
                }
            }
        }
        Ok(())
    }

    fn resolve_with_answer(&mut self, s: u32, at: usize, a: u32) -> Result<(), Halt> {
        let (sc, ac) = (&self.clauses[s as usize], &self.clauses[a as usize]);
        if let Some(r) = resolve_call(&sc.clause, at, &ac.clause) {
            let prov = sc.prov.union(&ac.prov);
            self.add(r, prov)?;
        }
        Ok(())
    }

    /// Abducible resolution on delayed clauses that mention `f`.
    fn wake(&mut self, f: FunctorId) -> Result<(), Halt> {
        let mut k = 0;
        while k < self.delayed_by_functor[f.0 as usize].len() {
            let id = self.delayed_by_functor[f.0 as usize][k];
            k += 1;
            if self.consumed[id as usize] {
                continue;
            }
            if let Some((at, inst)) = self.covered_abducible(&self.clauses[id as usize].clause) {
                self.consumed[id as usize] = true;
                self.undo.push(Undo::Consumed(id));
                self.resolve_covered(id, at, inst)?;
            }
        }
        Ok(())
    }

    /// The missing entry to decide next: among the abducibles of delayed
    /// clauses, the one with the fewest missing instances (ties: earliest
    /// clause, leftmost literal); its lexicographically first missing input.
    fn select_abduction(&self) -> Option<(FunctorId, usize, Tuple)> {
        let mut best: Option<(usize, FunctorId, Tuple)> = None;
        for &id in &self.delayed {
            if self.consumed[id as usize] {
                continue;
            }
            for l in &self.clauses[id as usize].clause.body {
                let Lit::Abd(f, args) = l else { continue };
                let mut missing = 0;
                let mut first = None;
                for t in input_instances(args, self.n) {
                    if self.table.get(*f, &t).is_none() {
                        missing += 1;
                        if first.as_ref().is_none_or(|b: &Tuple| t < *b) {
                            first = Some(t);
                        }
                    }
                }
                if missing > 0 && best.as_ref().is_none_or(|(m, _, _)| missing < *m) {
                    best = Some((missing, *f, first.unwrap()));
                }
            }
        }
        best.map(|(_, f, t)| (f, tuple_index(&t, self.n), t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::abstract_compile;
    use crate::leastmodel::query_fails;
    use crate::syntax::parse_program;

    fn run(src: &str, n: usize, opts: &SearchOptions) -> (AbstractProgram, SearchResult) {
        let (p, q) = parse_program(src, None).unwrap();
        let ap = abstract_compile(&p, &q);
        let r = solve(&ap, n, opts);
        (ap, r)
    }

    const ODD_EVEN: &str = "even(zero). even(s(X)) :- odd(X). odd(s(X)) :- even(X). odd_even :- even(X), odd(X).";

    #[test]
    fn odd_even_has_a_two_element_witness() {
        let (ap, r) = run(ODD_EVEN, 2, &SearchOptions::default());
        let Outcome::Solution(j) = r.outcome else { panic!("{:?}", r.outcome) };
        assert!(query_fails(&ap, &j.completed()));
    }

    #[test]
    fn odd_even_single_element_is_exhausted() {
        let (_, r) = run(ODD_EVEN, 1, &SearchOptions::default());
        assert_eq!(r.outcome, Outcome::Exhausted);
    }

    #[test]
    fn query_on_undefined_predicate_fails_trivially() {
        let (_, r) = run("main :- p(X).", 1, &SearchOptions::default());
        assert!(matches!(r.outcome, Outcome::Solution(_)));
        assert_eq!(r.stats.abductions, 0);
    }

    #[test]
    fn ground_success_is_exhausted_immediately() {
        let (_, r) = run("p(a). main :- p(X).", 3, &SearchOptions::default());
        assert_eq!(r.outcome, Outcome::Exhausted);
    }

    #[test]
    fn ablations_agree_on_small_programs() {
        for n in 1..=3 {
            let mut verdicts = Vec::new();
            for ib in [true, false] {
                for sym in [true, false] {
                    let opts = SearchOptions { intelligent_backtracking: ib, symmetry: sym, ..Default::default() };
                    let (_, r) = run(ODD_EVEN, n, &opts);
                    verdicts.push(matches!(r.outcome, Outcome::Solution(_)));
                }
            }
            assert!(verdicts.windows(2).all(|w| w[0] == w[1]), "n={n}: {verdicts:?}");
        }
    }

    #[test]
    fn candidates_follow_least_number_rule() {
        let (p, q) = parse_program(ODD_EVEN, None).unwrap();
        let ap = abstract_compile(&p, &q);
        let opts = SearchOptions::default();
        let e = Engine::new(&ap, 4, &opts);
        assert_eq!(e.candidates(&[]).as_slice(), &[Elem(0)]);
        assert_eq!(e.candidates(&[Elem(2)]).as_slice(), &[Elem(0), Elem(2)]);
    }
}
