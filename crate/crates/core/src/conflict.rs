//! Conflict sets for intelligent backtracking.
//!
//! A conflict set names the choice points (by depth on the search stack)
//! whose current values together are inconsistent with the program. Every
//! derived clause carries the union of the conflict sets of its parents; a
//! derived `false` yields a primary conflict. When all values of a choice
//! point have been refuted, the union of the recorded conflicts (minus the
//! choice point itself) is a secondary conflict.

use std::fmt;

use smallvec::SmallVec;

use crate::preinterp::{Component, Elem, Permutation};

/// A set of choice-point depths.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct ConflictSet {
    words: SmallVec<[u64; 2]>,
}

impl fmt::Debug for ConflictSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl ConflictSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn singleton(d: usize) -> Self {
        let mut s = Self::empty();
        s.insert(d);
        s
    }

    /// `{0, .., len-1}`.
    pub fn prefix(len: usize) -> Self {
        let mut s = Self::empty();
        for d in 0..len {
            s.insert(d);
        }
        s
    }

    pub fn insert(&mut self, d: usize) {
        let w = d / 64;
        if self.words.len() <= w {
            self.words.resize(w + 1, 0);
        }
        self.words[w] |= 1 << (d % 64);
    }

    pub fn remove(&mut self, d: usize) {
        if let Some(w) = self.words.get_mut(d / 64) {
            *w &= !(1 << (d % 64));
        }
        self.trim();
    }

    fn trim(&mut self) {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }

    pub fn contains(&self, d: usize) -> bool {
        self.words.get(d / 64).is_some_and(|w| w >> (d % 64) & 1 == 1)
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn union_with(&mut self, other: &ConflictSet) {
        if self.words.len() < other.words.len() {
            self.words.resize(other.words.len(), 0);
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn union(&self, other: &ConflictSet) -> ConflictSet {
        let mut s = self.clone();
        s.union_with(other);
        s
    }

    pub fn without(&self, d: usize) -> ConflictSet {
        let mut s = self.clone();
        s.remove(d);
        s
    }

    /// Deepest member.
    pub fn max(&self) -> Option<usize> {
        self.words.iter().enumerate().rev().find(|(_, &w)| w != 0).map(|(i, &w)| i * 64 + 63 - w.leading_zeros() as usize)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words
            .iter()
            .enumerate()
            .flat_map(|(i, &w)| (0..64).filter(move |b| w >> b & 1 == 1).map(move |b| i * 64 + b))
    }

    /// Drops every member at depth `>= len`.
    pub fn truncate(&mut self, len: usize) {
        let words = len.div_ceil(64);
        self.words.truncate(words);
        if !len.is_multiple_of(64) {
            if let Some(w) = self.words.get_mut(len / 64) {
                *w &= (1u64 << (len % 64)) - 1;
            }
        }
        self.trim();
    }
}

/// Conflict propagated through one derivation step.
pub fn propagate(a: &ConflictSet, b: &ConflictSet) -> ConflictSet {
    a.union(b)
}

/// Where to resume after a conflict: the deepest choice point involved, or
/// `None` when the conflict is empty and the search space is exhausted.
pub fn backjump_target(conflict: &ConflictSet) -> Option<usize> {
    conflict.max()
}

/// Per-choice-point record of the conflicts that refuted earlier values.
#[derive(Debug, Clone, Default)]
pub struct GeneratorRecord {
    /// Conflict (without this choice point) and the refuted value.
    pub rejected: Vec<(Elem, ConflictSet)>,
}

impl GeneratorRecord {
    pub fn record(&mut self, value: Elem, conflict: ConflictSet) {
        self.rejected.push((value, conflict));
    }

    /// Conflict of an exhausted generator: the union of its records.
    pub fn secondary_conflict(&self) -> ConflictSet {
        let mut out = ConflictSet::empty();
        for (_, c) in &self.rejected {
            out.union_with(c);
        }
        out
    }
}

/// Largest domain for which [`symmetry_reject`] enumerates permutations.
pub const SYMMETRY_MAX_DOMAIN: usize = 6;

/// Looks for a domain permutation mapping every component of `conflict`
/// onto a component of `candidate` (given as a lookup function). Returns the
/// matched image on success. Skipped (returns `None`) above
/// [`SYMMETRY_MAX_DOMAIN`] elements.
pub fn symmetry_reject(
    conflict: &[Component],
    lookup: &dyn Fn(&Component) -> bool,
    perms: &[Permutation],
) -> Option<Vec<Component>> {
    if conflict.is_empty() {
        return None;
    }
    if perms.first().is_some_and(|p| p.0.len() > SYMMETRY_MAX_DOMAIN) {
        return None;
    }
    'perm: for pi in perms {
        let mut image = Vec::with_capacity(conflict.len());
        for c in conflict {
            let mapped = Component {
                functor: c.functor,
                inputs: c.inputs.iter().map(|&e| pi.apply(e)).collect(),
                output: pi.apply(c.output),
            };
            if !lookup(&mapped) {
                continue 'perm;
            }
            image.push(mapped);
        }
        return Some(image);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::FunctorId;
    use smallvec::smallvec;

    #[test]
    fn set_operations() {
        let mut s = ConflictSet::empty();
        assert!(s.is_empty() && s.max().is_none());
        s.insert(3);
        s.insert(70);
        assert_eq!(s.max(), Some(70));
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![3, 70]);
        assert_eq!(s.without(70).max(), Some(3));
        s.truncate(4);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![3]);
        assert_eq!(ConflictSet::prefix(3).len(), 3);
    }

    #[test]
    fn backjump_goes_to_deepest_member() {
        let c = propagate(&ConflictSet::singleton(1), &ConflictSet::singleton(4));
        assert_eq!(backjump_target(&c), Some(4));
        assert_eq!(backjump_target(&ConflictSet::empty()), None);
    }

    #[test]
    fn secondary_conflict_is_union_of_records() {
        let mut g = GeneratorRecord::default();
        g.record(Elem(0), ConflictSet::singleton(0));
        g.record(Elem(1), ConflictSet::singleton(2));
        assert_eq!(g.secondary_conflict().iter().collect::<Vec<_>>(), vec![0, 2]);
        assert!(GeneratorRecord::default().secondary_conflict().is_empty());
    }

    #[test]
    fn isomorphic_conflict_detected() {
        let s = FunctorId(0);
        let comp = |i: u8, o: u8| Component { functor: s, inputs: smallvec![Elem(i)], output: Elem(o) };
        // conflict {s(d0)=d0}; candidate contains s(d1)=d1
        let conflict = vec![comp(0, 0)];
        let cand = [comp(1, 1), comp(0, 1)];
        let lookup = |c: &Component| cand.contains(c);
        let perms = Permutation::all(2);
        assert_eq!(symmetry_reject(&conflict, &lookup, &perms), Some(vec![comp(1, 1)]));
        let cand2 = [comp(0, 1), comp(1, 0)];
        let lookup2 = |c: &Component| cand2.contains(c);
        assert_eq!(symmetry_reject(&conflict, &lookup2, &perms), None);
    }
}
