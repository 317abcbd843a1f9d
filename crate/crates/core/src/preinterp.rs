//! Pre-interpretations: a finite domain `{d0, .., d(n-1)}` together with a
//! (possibly partial) function table for every functor.

use std::fmt;

use smallvec::SmallVec;
use thiserror::Error;

use crate::syntax::{FunctorId, Symbols, Term, VarId};

/// A domain element `d_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Elem(pub u8);

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{}", self.0)
    }
}

/// Largest domain size supported (domains are stored in `u32` bitsets by the
/// finite-domain solver).
pub const MAX_DOMAIN: usize = 32;

pub type Tuple = SmallVec<[Elem; 4]>;

/// One entry `f(d1, .., dk) = d` of a function table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Component {
    pub functor: FunctorId,
    pub inputs: Tuple,
    pub output: Elem,
}

/// Index of `inputs` in the lexicographic enumeration of `D^k`.
pub fn tuple_index(inputs: &[Elem], n: usize) -> usize {
    inputs.iter().fold(0, |acc, e| acc * n + e.0 as usize)
}

/// Inverse of [`tuple_index`].
pub fn tuple_at(mut index: usize, arity: usize, n: usize) -> Tuple {
    let mut out: Tuple = SmallVec::from_elem(Elem(0), arity);
    for slot in out.iter_mut().rev() {
        *slot = Elem((index % n) as u8);
        index /= n;
    }
    out
}

/// All tuples of `D^arity` in lexicographic order.
pub fn all_tuples(arity: usize, n: usize) -> impl Iterator<Item = Tuple> {
    (0..n.pow(arity as u32)).map(move |i| tuple_at(i, arity, n))
}

/// A bijection on the domain, stored as the image of each element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation(pub Vec<Elem>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation((0..n as u8).map(Elem).collect())
    }

    pub fn apply(&self, e: Elem) -> Elem {
        self.0[e.0 as usize]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![Elem(0); self.0.len()];
        for (i, &e) in self.0.iter().enumerate() {
            inv[e.0 as usize] = Elem(i as u8);
        }
        Permutation(inv)
    }

    /// Every permutation of `{d0, .., d(n-1)}`, identity first.
    pub fn all(n: usize) -> Vec<Permutation> {
        let mut out = Vec::new();
        let mut cur: Vec<u8> = (0..n as u8).collect();
        loop {
            out.push(Permutation(cur.iter().map(|&x| Elem(x)).collect()));
            // next lexicographic permutation
            let Some(i) = (1..cur.len()).rev().find(|&i| cur[i - 1] < cur[i]) else { break };
            let j = (i..cur.len()).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
            cur.swap(i - 1, j);
            cur[i..].reverse();
        }
        out
    }
}

/// `eval_term` hit a component that is not defined yet.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("undetermined component of functor {} at {inputs:?}", functor.0)]
pub struct Undetermined {
    pub functor: FunctorId,
    pub inputs: Tuple,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PreInterpretation {
    size: usize,
    arities: Vec<usize>,
    tables: Vec<Vec<Option<Elem>>>,
}

impl PreInterpretation {
    /// An empty (fully undefined) pre-interpretation over `n` elements for
    /// functors with the given arities, indexed by `FunctorId`.
    pub fn new(n: usize, arities: Vec<usize>) -> Self {
        assert!((1..=MAX_DOMAIN).contains(&n), "domain size must be in 1..={MAX_DOMAIN}");
        let tables = arities.iter().map(|&k| vec![None; n.pow(k as u32)]).collect();
        PreInterpretation { size: n, arities, tables }
    }

    pub fn for_symbols(n: usize, symbols: &Symbols) -> Self {
        Self::new(n, symbols.functor_arities())
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn arities(&self) -> &[usize] {
        &self.arities
    }

    pub fn arity(&self, f: FunctorId) -> usize {
        self.arities[f.0 as usize]
    }

    pub fn num_functors(&self) -> usize {
        self.arities.len()
    }

    /// Number of components of a total pre-interpretation.
    pub fn num_cells(&self) -> usize {
        self.tables.iter().map(Vec::len).sum()
    }

    pub fn get(&self, f: FunctorId, inputs: &[Elem]) -> Option<Elem> {
        self.tables[f.0 as usize][tuple_index(inputs, self.size)]
    }

    pub fn get_index(&self, f: FunctorId, index: usize) -> Option<Elem> {
        self.tables[f.0 as usize][index]
    }

    pub fn set(&mut self, f: FunctorId, inputs: &[Elem], value: Elem) {
        let i = tuple_index(inputs, self.size);
        self.tables[f.0 as usize][i] = Some(value);
    }

    pub fn set_index(&mut self, f: FunctorId, index: usize, value: Option<Elem>) {
        self.tables[f.0 as usize][index] = value;
    }

    pub fn is_total(&self) -> bool {
        self.tables.iter().all(|t| t.iter().all(Option::is_some))
    }

    /// Defined components in functor order, then lexicographic input order.
    pub fn components(&self) -> impl Iterator<Item = Component> + '_ {
        self.tables.iter().enumerate().flat_map(move |(f, table)| {
            table.iter().enumerate().filter_map(move |(i, v)| {
                v.map(|output| Component {
                    functor: FunctorId(f as u32),
                    inputs: tuple_at(i, self.arities[f], self.size),
                    output,
                })
            })
        })
    }

    /// First undefined component in the same order as [`Self::components`].
    pub fn first_missing(&self) -> Option<(FunctorId, Tuple)> {
        self.tables.iter().enumerate().find_map(|(f, table)| {
            table
                .iter()
                .position(Option::is_none)
                .map(|i| (FunctorId(f as u32), tuple_at(i, self.arities[f], self.size)))
        })
    }

    /// Evaluates a ground term.
    pub fn eval_ground(&self, t: &Term) -> Result<Elem, Undetermined> {
        self.eval_term(t, &|v| panic!("eval_ground on non-ground term (variable {})", v.0))
    }

    /// Evaluates a term under a variable assignment.
    pub fn eval_term(&self, t: &Term, assign: &dyn Fn(VarId) -> Elem) -> Result<Elem, Undetermined> {
        match t {
            Term::Var(v) => Ok(assign(*v)),
            Term::App(f, args) => {
                let inputs = args
                    .iter()
                    .map(|a| self.eval_term(a, assign))
                    .collect::<Result<Tuple, _>>()?;
                self.get(*f, &inputs).ok_or(Undetermined { functor: *f, inputs })
            }
        }
    }

    /// Fills every undefined component with `d0`.
    pub fn complete(&mut self) {
        for table in &mut self.tables {
            for cell in table.iter_mut().filter(|c| c.is_none()) {
                *cell = Some(Elem(0));
            }
        }
    }

    pub fn completed(mut self) -> Self {
        self.complete();
        self
    }

    /// The isomorphic pre-interpretation `pi(J)`: `f(pi d1, .., pi dk) = pi d`
    /// whenever `f(d1, .., dk) = d` in `J`.
    pub fn apply_permutation(&self, pi: &Permutation) -> Self {
        let mut out = PreInterpretation::new(self.size, self.arities.clone());
        for c in self.components() {
            let inputs: Tuple = c.inputs.iter().map(|&e| pi.apply(e)).collect();
            out.set(c.functor, &inputs, pi.apply(c.output));
        }
        out
    }

    /// `self` agrees with `other` wherever `self` is defined.
    pub fn is_extended_by(&self, other: &PreInterpretation) -> bool {
        self.tables
            .iter()
            .zip(&other.tables)
            .all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.is_none() || x == y))
    }

    /// Human-readable, sorted `f(d0,d1) = d2` lines.
    pub fn render(&self, symbols: &Symbols) -> Vec<String> {
        let mut lines: Vec<String> = self.components().map(|c| render_component(symbols, &c)).collect();
        lines.sort();
        lines
    }

    /// Builds a total pre-interpretation from a mixed-radix index over all
    /// cells (functor order, lexicographic inputs, first cell most significant).
    pub fn from_index(n: usize, arities: Vec<usize>, mut index: u128) -> Self {
        let mut out = PreInterpretation::new(n, arities);
        for table in out.tables.iter_mut().rev() {
            for cell in table.iter_mut().rev() {
                *cell = Some(Elem((index % n as u128) as u8));
                index /= n as u128;
            }
        }
        out
    }

    /// Inverse of [`Self::from_index`]; undefined cells count as `d0`.
    pub fn to_index(&self) -> u128 {
        let n = self.size as u128;
        self.tables
            .iter()
            .flatten()
            .fold(0u128, |acc, c| acc * n + c.map_or(0, |e| e.0 as u128))
    }
}

pub fn render_component(symbols: &Symbols, c: &Component) -> String {
    let name = &symbols.functor_symbol(c.functor).name;
    if c.inputs.is_empty() {
        format!("{name} = {}", c.output)
    } else {
        let args: Vec<String> = c.inputs.iter().map(Elem::to_string).collect();
        format!("{name}({}) = {}", args.join(","), c.output)
    }
}
