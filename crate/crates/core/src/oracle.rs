//! Brute-force reference procedures. Everything here is exponential and only
//! meant for small programs and domains; the search engines are tested
//! against it.

use rayon::prelude::*;
use thiserror::Error;

use crate::abstraction::AbstractProgram;
use crate::leastmodel::{query_fails, Interpretation};
use crate::preinterp::{tuple_index, Elem, Permutation, PreInterpretation};
use crate::syntax::{Atom, Program, Query, VarId};

/// Default bound on the number of objects an enumeration may visit.
pub const DEFAULT_CAP: u128 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("search space has {size} elements, above the cap of {cap}")]
    SpaceTooLarge { size: u128, cap: u128 },
}

#[derive(Debug, Clone)]
pub struct EnumerationReport {
    pub domain_size: usize,
    /// `prod_f n^(n^arity(f))`.
    pub space_size: u128,
    /// Total pre-interpretations under which the query fails.
    pub failing: u64,
    /// The first few failing pre-interpretations in enumeration order.
    pub witnesses: Vec<PreInterpretation>,
    /// Number of failing pre-interpretations up to domain permutation;
    /// `None` when only counting.
    pub iso_classes: Option<u64>,
}

#[derive(Debug, Clone, Copy)]
pub struct EnumerationOptions {
    pub cap: u128,
    pub count_only: bool,
    pub max_witnesses: usize,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        EnumerationOptions { cap: DEFAULT_CAP, count_only: false, max_witnesses: 8 }
    }
}

/// Number of total pre-interpretations of the program's functors over `n`
/// elements, or `None` on overflow.
pub fn space_size(arities: &[usize], n: usize) -> Option<u128> {
    let cells: u32 = arities.iter().map(|&k| (n as u64).checked_pow(k as u32)).sum::<Option<u64>>()?.try_into().ok()?;
    (n as u128).checked_pow(cells)
}

/// Canonical representative index of the isomorphism class of `j`.
pub fn canonical_index(j: &PreInterpretation, perms: &[Permutation]) -> u128 {
    perms.iter().map(|p| j.apply_permutation(p).to_index()).min().unwrap_or_else(|| j.to_index())
}

/// Enumerates every total pre-interpretation over `n` elements and checks
/// the query in each least model.
pub fn enumerate_preinterps(
    ap: &AbstractProgram,
    n: usize,
    opts: EnumerationOptions,
) -> Result<EnumerationReport, OracleError> {
    let arities = ap.arities();
    let size = space_size(&arities, n).unwrap_or(u128::MAX);
    if size > opts.cap {
        return Err(OracleError::SpaceTooLarge { size, cap: opts.cap });
    }
    let total = size as u64;
    let failing_idx: Vec<u64> = (0..total)
        .into_par_iter()
        .filter(|&i| query_fails(ap, &PreInterpretation::from_index(n, arities.clone(), i as u128)))
        .collect();
    let witnesses = failing_idx
        .iter()
        .take(opts.max_witnesses)
        .map(|&i| PreInterpretation::from_index(n, arities.clone(), i as u128))
        .collect();
    let iso_classes = (!opts.count_only).then(|| {
        let perms = Permutation::all(n);
        let mut canon: Vec<u128> = failing_idx
            .par_iter()
            .map(|&i| canonical_index(&PreInterpretation::from_index(n, arities.clone(), i as u128), &perms))
            .collect();
        canon.sort_unstable();
        canon.dedup();
        canon.len() as u64
    });
    Ok(EnumerationReport { domain_size: n, space_size: size, failing: failing_idx.len() as u64, witnesses, iso_classes })
}

/// Ground atoms over program predicates are numbered `offset[p] + tuple index`.
#[derive(Debug, Clone)]
pub struct GroundProgram {
    pub n: usize,
    pub offsets: Vec<usize>,
    pub num_atoms: usize,
    /// `(head, body)` for every ground instance of every clause.
    pub rules: Vec<(usize, Vec<usize>)>,
    /// Body of every ground instance of the query.
    pub query: Vec<Vec<usize>>,
}

/// Grounds the original (non-abstracted) program under a total `j` by
/// evaluating terms directly, with clause variables ranging over the domain.
type Assignment<'a> = dyn Fn(VarId) -> Elem + 'a;

pub fn ground(program: &Program, query: &Query, j: &PreInterpretation) -> GroundProgram {
    let n = j.size();
    let mut offsets = Vec::new();
    let mut num_atoms = 0;
    for p in program.symbols.preds() {
        offsets.push(num_atoms);
        num_atoms += n.pow(program.symbols.pred_arity(p) as u32);
    }
    let atom_index = |a: &Atom, assign: &dyn Fn(VarId) -> Elem| -> usize {
        let t: Vec<Elem> = a
            .args
            .iter()
            .map(|t| j.eval_term(t, assign).expect("ground() needs a total pre-interpretation"))
            .collect();
        offsets[a.pred.0 as usize] + tuple_index(&t, n)
    };
    let instances = |vars: &[VarId], f: &mut dyn FnMut(&Assignment)| {
        for idx in 0..n.pow(vars.len() as u32) {
            let vals = crate::preinterp::tuple_at(idx, vars.len(), n);
            let assign = |v: VarId| vals[vars.iter().position(|&w| w == v).unwrap()];
            f(&assign);
        }
    };
    let mut rules = Vec::new();
    for c in &program.clauses {
        instances(&c.vars(), &mut |assign| {
            rules.push((atom_index(&c.head, assign), c.body.iter().map(|a| atom_index(a, assign)).collect()));
        });
    }
    let mut qbodies = Vec::new();
    instances(&query.vars(), &mut |assign| {
        qbodies.push(query.body.iter().map(|a| atom_index(a, assign)).collect());
    });
    GroundProgram { n, offsets, num_atoms, rules, query: qbodies }
}

impl GroundProgram {
    pub fn least_model(&self) -> Vec<bool> {
        let mut m = vec![false; self.num_atoms];
        loop {
            let mut changed = false;
            for (h, body) in &self.rules {
                if !m[*h] && body.iter().all(|&b| m[b]) {
                    m[*h] = true;
                    changed = true;
                }
            }
            if !changed {
                return m;
            }
        }
    }

    pub fn query_true(&self, m: &[bool]) -> bool {
        self.query.iter().any(|body| body.iter().all(|&b| m[b]))
    }

    /// `m` satisfies every ground clause and falsifies the query.
    pub fn is_model(&self, m: &[bool]) -> bool {
        self.rules.iter().all(|(h, body)| m[*h] || !body.iter().all(|&b| m[b])) && !self.query_true(m)
    }
}

/// Least model of the original program under a total `j`, computed without
/// abstract compilation.
pub fn direct_least_model(program: &Program, query: &Query, j: &PreInterpretation) -> Interpretation {
    let g = ground(program, query, j);
    let m = g.least_model();
    let mut out = Interpretation::for_symbols(j.size(), &program.symbols);
    for p in program.symbols.preds() {
        let k = program.symbols.pred_arity(p);
        for i in 0..j.size().pow(k as u32) {
            if m[g.offsets[p.0 as usize] + i] {
                out.insert(p, &crate::preinterp::tuple_at(i, k, j.size()));
            }
        }
    }
    out
}

/// Outcome of checking, for one total `J`, whether some interpretation based
/// on `J` is a model of the program that falsifies the query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterpretationCheck {
    pub preinterp_index: u128,
    /// Number of models of the program plus `false <- query` based on `J`.
    pub models: u64,
    /// The query fails in the least model under `J`.
    pub fails_in_least_model: bool,
}

impl InterpretationCheck {
    /// A model exists exactly when the query fails in the least model.
    pub fn consistent(&self) -> bool {
        (self.models > 0) == self.fails_in_least_model
    }
}

/// For every total `J` over `n` elements, counts the interpretations based on
/// `J` that model the program and falsify the query.
pub fn enumerate_interpretations(
    program: &Program,
    query: &Query,
    ap: &AbstractProgram,
    n: usize,
    cap: u128,
) -> Result<Vec<InterpretationCheck>, OracleError> {
    let arities = program.symbols.functor_arities();
    let pre = space_size(&arities, n).unwrap_or(u128::MAX);
    let atoms: u32 = program.symbols.preds().map(|p| n.pow(program.symbols.pred_arity(p) as u32) as u32).sum();
    let size = 1u128.checked_shl(atoms).and_then(|i| i.checked_mul(pre)).unwrap_or(u128::MAX);
    if size > cap || atoms >= 64 {
        return Err(OracleError::SpaceTooLarge { size, cap });
    }
    Ok((0..pre as u64)
        .into_par_iter()
        .map(|idx| {
            let j = PreInterpretation::from_index(n, arities.clone(), idx as u128);
            let g = ground(program, query, &j);
            let mut m = vec![false; g.num_atoms];
            let mut models = 0;
            for bits in 0..1u64 << atoms {
                for (k, slot) in m.iter_mut().enumerate() {
                    *slot = bits >> k & 1 == 1;
                }
                models += g.is_model(&m) as u64;
            }
            InterpretationCheck { preinterp_index: idx as u128, models, fails_in_least_model: query_fails(ap, &j) }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::abstract_compile;
    use crate::syntax::parse_program;

    const ODD_EVEN: &str = "even(zero). even(s(X)) :- odd(X). odd(s(X)) :- even(X). odd_even :- even(X), odd(X).";

    #[test]
    fn space_sizes() {
        assert_eq!(space_size(&[0, 1], 2), Some(8));
        assert_eq!(space_size(&[2, 2, 0], 3), Some(3u128.pow(19)));
    }

    #[test]
    fn cap_is_enforced() {
        let (p, q) = parse_program(ODD_EVEN, None).unwrap();
        let ap = abstract_compile(&p, &q);
        let opts = EnumerationOptions { cap: 4, ..Default::default() };
        assert_eq!(enumerate_preinterps(&ap, 2, opts).unwrap_err(), OracleError::SpaceTooLarge { size: 8, cap: 4 });
    }

    #[test]
    fn empty_program_has_a_model() {
        let (p, q) = parse_program("main :- p(X).", None).unwrap();
        let ap = abstract_compile(&p, &q);
        let checks = enumerate_interpretations(&p, &q, &ap, 1, DEFAULT_CAP).unwrap();
        assert_eq!(checks.len(), 1);
        assert!(checks[0].models >= 1 && checks[0].consistent());
    }

    #[test]
    fn direct_model_matches_parity() {
        let (p, q) = parse_program(ODD_EVEN, None).unwrap();
        let ap = abstract_compile(&p, &q);
        let mut j = PreInterpretation::for_symbols(2, &p.symbols);
        j.set(p.symbols.lookup_functor("zero", 0).unwrap(), &[], Elem(0));
        j.set(p.symbols.lookup_functor("s", 1).unwrap(), &[Elem(0)], Elem(1));
        j.set(p.symbols.lookup_functor("s", 1).unwrap(), &[Elem(1)], Elem(0));
        assert_eq!(direct_least_model(&p, &q, &j), crate::leastmodel::least_model(&ap, &j));
    }
}
