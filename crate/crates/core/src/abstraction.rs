//! Abstract compilation: every compound or constant term is replaced by a
//! fresh variable and an abducible `p_f(X1, .., Xk, Y)` standing for the
//! (unknown) function table entry `f(X1, .., Xk) = Y`. The result is a
//! function-free program whose least model under a pre-interpretation `J`,
//! restricted to program predicates, coincides with the least model of the
//! original program over `J`.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::preinterp::{Component, PreInterpretation};
use crate::syntax::{FunctorId, PredId, Program, Query, Symbols, Term, VarId};

/// Clause-local variable.
pub type LVar = u32;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PredCall {
    pub pred: PredId,
    pub args: Vec<LVar>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Abducible {
    pub functor: FunctorId,
    pub inputs: Vec<LVar>,
    pub output: LVar,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Literal {
    Call(PredCall),
    Abduce(Abducible),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractClause {
    pub head: PredCall,
    /// Abducibles precede the literal consuming their output.
    pub body: Vec<Literal>,
    pub num_vars: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractQuery {
    pub body: Vec<Literal>,
    pub num_vars: u32,
}

#[derive(Debug, Clone)]
pub struct AbstractProgram {
    pub symbols: Symbols,
    pub clauses: Vec<AbstractClause>,
    /// Clause indices per predicate, indexed by `PredId`.
    pub by_pred: Vec<Vec<usize>>,
    pub query: AbstractQuery,
    pub query_name: String,
}

impl AbstractProgram {
    pub fn arities(&self) -> Vec<usize> {
        self.symbols.functor_arities()
    }

    pub fn num_preds(&self) -> usize {
        self.symbols.num_preds()
    }

    /// Size of the relational form of a total pre-interpretation: `sum_f n^arity(f)`.
    pub fn preinterp_size(&self, n: usize) -> u64 {
        self.symbols.functors().map(|f| (n as u64).pow(self.symbols.functor_arity(f) as u32)).sum()
    }

    /// Number of ground atoms over program predicates: `sum_p n^arity(p)`.
    pub fn interp_size(&self, n: usize) -> u64 {
        self.symbols.preds().map(|p| (n as u64).pow(self.symbols.pred_arity(p) as u32)).sum()
    }

    /// Writes the program as a plain text program in which abducibles are
    /// ordinary atoms `p_<functor>(..)`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.clauses {
            call_text(&self.symbols, &c.head, &mut out);
            body_text(&self.symbols, &c.body, &mut out);
            out.push('\n');
        }
        out.push_str(&self.query_name);
        body_text(&self.symbols, &self.query.body, &mut out);
        out.push('\n');
        out
    }
}

/// Name under which the abducible for `f` is printed.
pub fn abducible_name(symbols: &Symbols, f: FunctorId) -> String {
    format!("p_{}", symbols.functor_symbol(f).name)
}

fn var_name(v: LVar) -> String {
    if v < 26 {
        char::from(b'A' + v as u8).to_string()
    } else {
        format!("V{v}")
    }
}

fn args_text(args: impl Iterator<Item = LVar>, out: &mut String) {
    let names: Vec<String> = args.map(var_name).collect();
    if !names.is_empty() {
        let _ = write!(out, "({})", names.join(","));
    }
}

fn call_text(symbols: &Symbols, c: &PredCall, out: &mut String) {
    out.push_str(&symbols.pred_symbol(c.pred).name);
    args_text(c.args.iter().copied(), out);
}

fn literal_text(symbols: &Symbols, l: &Literal, out: &mut String) {
    match l {
        Literal::Call(c) => call_text(symbols, c, out),
        Literal::Abduce(a) => {
            let name = abducible_name(symbols, a.functor);
            if name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                out.push_str(&name);
            } else {
                let _ = write!(out, "'{name}'");
            }
            args_text(a.inputs.iter().copied().chain(std::iter::once(a.output)), out);
        }
    }
}

fn body_text(symbols: &Symbols, body: &[Literal], out: &mut String) {
    if !body.is_empty() {
        out.push_str(" :- ");
        for (i, l) in body.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            literal_text(symbols, l, out);
        }
    }
    out.push('.');
}

struct Flattener {
    vars: HashMap<VarId, LVar>,
    next: LVar,
    /// Identical ground subterms share one abducible.
    ground: HashMap<(FunctorId, Vec<LVar>), LVar>,
    emitted: Vec<Literal>,
}

impl Flattener {
    fn new() -> Self {
        Flattener { vars: HashMap::new(), next: 0, ground: HashMap::new(), emitted: Vec::new() }
    }

    fn fresh(&mut self) -> LVar {
        self.next += 1;
        self.next - 1
    }

    /// Returns the variable standing for `t` and whether `t` is ground.
    fn flatten(&mut self, t: &Term) -> (LVar, bool) {
        match t {
            Term::Var(v) => {
                if let Some(&l) = self.vars.get(v) {
                    return (l, false);
                }
                let l = self.fresh();
                self.vars.insert(*v, l);
                (l, false)
            }
            Term::App(f, args) => {
                let mut inputs = Vec::with_capacity(args.len());
                let mut ground = true;
                for a in args {
                    let (l, g) = self.flatten(a);
                    inputs.push(l);
                    ground &= g;
                }
                if ground {
                    if let Some(&l) = self.ground.get(&(*f, inputs.clone())) {
                        return (l, true);
                    }
                }
                let output = self.fresh();
                if ground {
                    self.ground.insert((*f, inputs.clone()), output);
                }
                self.emitted.push(Literal::Abduce(Abducible { functor: *f, inputs, output }));
                (output, ground)
            }
        }
    }

    fn call(&mut self, pred: PredId, args: &[Term]) -> PredCall {
        PredCall { pred, args: args.iter().map(|t| self.flatten(t).0).collect() }
    }
}

/// Renumbers variables by first occurrence (head first, then body).
struct Renumber {
    map: HashMap<LVar, LVar>,
}

impl Renumber {
    fn var(&mut self, v: LVar) -> LVar {
        let next = self.map.len() as LVar;
        *self.map.entry(v).or_insert(next)
    }

    fn call(&mut self, c: &PredCall) -> PredCall {
        PredCall { pred: c.pred, args: c.args.iter().map(|&v| self.var(v)).collect() }
    }

    fn literal(&mut self, l: &Literal) -> Literal {
        match l {
            Literal::Call(c) => Literal::Call(self.call(c)),
            Literal::Abduce(a) => {
                let inputs = a.inputs.iter().map(|&v| self.var(v)).collect();
                Literal::Abduce(Abducible { functor: a.functor, inputs, output: self.var(a.output) })
            }
        }
    }
}

fn compile_body(fl: &mut Flattener, body: &[crate::syntax::Atom], out: &mut Vec<Literal>) {
    for atom in body {
        let call = fl.call(atom.pred, &atom.args);
        out.append(&mut fl.emitted);
        out.push(Literal::Call(call));
    }
}

/// Abstract compilation of a program and its query.
pub fn abstract_compile(program: &Program, query: &Query) -> AbstractProgram {
    let mut clauses = Vec::with_capacity(program.clauses.len());
    for c in &program.clauses {
        let mut fl = Flattener::new();
        let head = fl.call(c.head.pred, &c.head.args);
        let mut body = std::mem::take(&mut fl.emitted);
        compile_body(&mut fl, &c.body, &mut body);
        let mut rn = Renumber { map: HashMap::new() };
        let head = rn.call(&head);
        let body: Vec<Literal> = body.iter().map(|l| rn.literal(l)).collect();
        clauses.push(AbstractClause { head, body, num_vars: rn.map.len() as u32 });
    }
    let mut fl = Flattener::new();
    let mut body = Vec::new();
    compile_body(&mut fl, &query.body, &mut body);
    let mut rn = Renumber { map: HashMap::new() };
    let body: Vec<Literal> = body.iter().map(|l| rn.literal(l)).collect();
    let query_ir = AbstractQuery { body, num_vars: rn.map.len() as u32 };

    AbstractProgram {
        symbols: program.symbols.clone(),
        clauses,
        by_pred: program.by_pred.clone(),
        query: query_ir,
        query_name: query.name.clone(),
    }
}

/// The relational form of `J`: one ground abducible `p_f(d1, .., dk, d)` per
/// defined component, in functor then lexicographic order.
pub fn relational_form(j: &PreInterpretation) -> Vec<Component> {
    j.components().collect()
}
