//! Terms, atoms and clauses of definite programs, plus a parser for the
//! Edinburgh-style subset used by the benchmark corpus.
//!
//! Functor and predicate names live in separate namespaces and are interned
//! per program as `(name, arity)` pairs. List syntax is sugar: `[]` is the
//! constant `nil` and `[H|T]` is `cons(H, T)`.

use std::collections::{BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use thiserror::Error;

/// Interned term functor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FunctorId(pub u32);

/// Interned predicate symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredId(pub u32);

/// Program-wide unique variable identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub u32);

pub const NIL: &str = "nil";
pub const CONS: &str = "cons";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FunctorSymbol {
    pub name: String,
    pub arity: usize,
}

impl fmt::Display for FunctorSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Namespace {
    symbols: Vec<FunctorSymbol>,
    index: HashMap<(String, usize), u32>,
}

impl Namespace {
    fn intern(&mut self, name: &str, arity: usize) -> u32 {
        if let Some(&id) = self.index.get(&(name.to_owned(), arity)) {
            return id;
        }
        let id = self.symbols.len() as u32;
        self.symbols.push(FunctorSymbol { name: name.to_owned(), arity });
        self.index.insert((name.to_owned(), arity), id);
        id
    }

    fn lookup(&self, name: &str, arity: usize) -> Option<u32> {
        self.index.get(&(name.to_owned(), arity)).copied()
    }
}

/// The two symbol tables of a program.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Symbols {
    functors: Namespace,
    preds: Namespace,
}

impl Symbols {
    pub fn functor(&mut self, name: &str, arity: usize) -> FunctorId {
        FunctorId(self.functors.intern(name, arity))
    }

    pub fn pred(&mut self, name: &str, arity: usize) -> PredId {
        PredId(self.preds.intern(name, arity))
    }

    pub fn lookup_functor(&self, name: &str, arity: usize) -> Option<FunctorId> {
        self.functors.lookup(name, arity).map(FunctorId)
    }

    pub fn lookup_pred(&self, name: &str, arity: usize) -> Option<PredId> {
        self.preds.lookup(name, arity).map(PredId)
    }

    pub fn functor_symbol(&self, f: FunctorId) -> &FunctorSymbol {
        &self.functors.symbols[f.0 as usize]
    }

    pub fn pred_symbol(&self, p: PredId) -> &FunctorSymbol {
        &self.preds.symbols[p.0 as usize]
    }

    pub fn functor_arity(&self, f: FunctorId) -> usize {
        self.functor_symbol(f).arity
    }

    pub fn pred_arity(&self, p: PredId) -> usize {
        self.pred_symbol(p).arity
    }

    pub fn num_functors(&self) -> usize {
        self.functors.symbols.len()
    }

    pub fn num_preds(&self) -> usize {
        self.preds.symbols.len()
    }

    pub fn functors(&self) -> impl Iterator<Item = FunctorId> + '_ {
        (0..self.functors.symbols.len() as u32).map(FunctorId)
    }

    pub fn preds(&self) -> impl Iterator<Item = PredId> + '_ {
        (0..self.preds.symbols.len() as u32).map(PredId)
    }

    /// Arity of every interned functor, indexed by `FunctorId`.
    pub fn functor_arities(&self) -> Vec<usize> {
        self.functors.symbols.iter().map(|s| s.arity).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(VarId),
    App(FunctorId, Vec<Term>),
}

impl Term {
    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::App(_, args) => args.iter().all(Term::is_ground),
        }
    }

    pub fn vars_into(&self, out: &mut Vec<VarId>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(*v)
                }
            }
            Term::App(_, args) => args.iter().for_each(|a| a.vars_into(out)),
        }
    }

    fn functors_into(&self, out: &mut BTreeSet<FunctorId>) {
        if let Term::App(f, args) = self {
            out.insert(*f);
            args.iter().for_each(|a| a.functors_into(out));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub pred: PredId,
    pub args: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub head: Atom,
    pub body: Vec<Atom>,
}

impl Clause {
    pub fn vars(&self) -> Vec<VarId> {
        let mut out = Vec::new();
        for t in self.head.args.iter().chain(self.body.iter().flat_map(|a| a.args.iter())) {
            t.vars_into(&mut out);
        }
        out
    }
}

/// A query `<- L1, ..., Ln`; its variables are existentially quantified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    /// Name of the 0-arity predicate whose body this query was taken from.
    pub name: String,
    pub body: Vec<Atom>,
}

impl Query {
    pub fn vars(&self) -> Vec<VarId> {
        let mut out = Vec::new();
        for t in self.body.iter().flat_map(|a| a.args.iter()) {
            t.vars_into(&mut out);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub symbols: Symbols,
    pub clauses: Vec<Clause>,
    /// Clause indices per predicate, indexed by `PredId`.
    pub by_pred: Vec<Vec<usize>>,
    /// Source names of variables, indexed by `VarId`.
    pub var_names: Vec<String>,
}

impl Program {
    pub fn defining(&self, p: PredId) -> impl Iterator<Item = &Clause> {
        self.by_pred
            .get(p.0 as usize)
            .into_iter()
            .flatten()
            .map(move |&i| &self.clauses[i])
    }

    /// Predicates that occur in the program but have no defining clause.
    pub fn undefined_preds(&self) -> Vec<PredId> {
        self.symbols
            .preds()
            .filter(|p| self.by_pred.get(p.0 as usize).is_none_or(|v| v.is_empty()))
            .collect()
    }

    /// Number of predicates with at least one defining clause.
    pub fn num_defined_preds(&self) -> usize {
        self.by_pred.iter().filter(|v| !v.is_empty()).count()
    }
}

/// Term functors and predicate symbols occurring in a program and query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub functors: BTreeSet<FunctorId>,
    pub preds: BTreeSet<PredId>,
}

pub fn collect_signature(program: &Program, query: &Query) -> Signature {
    let mut functors = BTreeSet::new();
    let mut preds = BTreeSet::new();
    let atoms = program
        .clauses
        .iter()
        .flat_map(|c| std::iter::once(&c.head).chain(c.body.iter()))
        .chain(query.body.iter());
    for atom in atoms {
        preds.insert(atom.pred);
        atom.args.iter().for_each(|t| t.functors_into(&mut functors));
    }
    Signature { functors, preds }
}

/// A parse failure, with 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{column}: syntax error: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{line}:{column}: {construct} is not allowed in a definite program")]
    NonDefinite { line: usize, column: usize, construct: String },
    #[error("query predicate `{0}` not found (it must be a 0-arity predicate with a rule body)")]
    QueryNotFound(String),
    #[error("no 0-arity predicate to use as the query")]
    NoQuery,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Name(String),
    Var(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Bar,
    Neck,
    End,
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let bump = |i: &mut usize, line: &mut usize, col: &mut usize, c: char| {
        *i += 1;
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let push = |out: &mut Vec<Spanned>, tok| out.push(Spanned { tok, line: l0, column: c0 });
        if c.is_whitespace() {
            bump(&mut i, &mut line, &mut col, c);
        } else if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                { let ch = chars[i]; bump(&mut i, &mut line, &mut col, ch) };
            }
        } else if c.is_ascii_lowercase() || c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                { let ch = chars[i]; bump(&mut i, &mut line, &mut col, ch) };
            }
            let name: String = chars[start..i].iter().collect();
            if c.is_ascii_digit() && !name.chars().all(|ch| ch.is_ascii_digit()) {
                return Err(ParseError::Syntax {
                    line: l0,
                    column: c0,
                    message: format!("malformed number `{name}`"),
                });
            }
            push(&mut out, Tok::Name(name));
        } else if c.is_ascii_uppercase() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                { let ch = chars[i]; bump(&mut i, &mut line, &mut col, ch) };
            }
            push(&mut out, Tok::Var(chars[start..i].iter().collect()));
        } else if c == '\'' {
            bump(&mut i, &mut line, &mut col, c);
            let start = i;
            while i < chars.len() && chars[i] != '\'' && chars[i] != '\n' {
                { let ch = chars[i]; bump(&mut i, &mut line, &mut col, ch) };
            }
            if i >= chars.len() || chars[i] != '\'' {
                return Err(ParseError::Syntax {
                    line: l0,
                    column: c0,
                    message: "unterminated quoted atom".into(),
                });
            }
            let name: String = chars[start..i].iter().collect();
            bump(&mut i, &mut line, &mut col, '\'');
            push(&mut out, Tok::Name(name));
        } else {
            let next = chars.get(i + 1).copied();
            let tok = match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                ',' => Tok::Comma,
                '|' => Tok::Bar,
                ':' if next == Some('-') => {
                    bump(&mut i, &mut line, &mut col, c);
                    Tok::Neck
                }
                '.' if next.is_none_or(|n| n.is_whitespace() || n == '%') => Tok::End,
                '!' => {
                    return Err(ParseError::NonDefinite { line: l0, column: c0, construct: "cut `!`".into() })
                }
                '\\' if next == Some('+') => {
                    return Err(ParseError::NonDefinite {
                        line: l0,
                        column: c0,
                        construct: "negation `\\+`".into(),
                    })
                }
                ';' => {
                    return Err(ParseError::NonDefinite {
                        line: l0,
                        column: c0,
                        construct: "disjunction `;`".into(),
                    })
                }
                '+' | '-' | '*' | '/' | '<' | '>' | '=' => {
                    return Err(ParseError::NonDefinite {
                        line: l0,
                        column: c0,
                        construct: format!("operator or arithmetic `{c}`"),
                    })
                }
                _ => {
                    return Err(ParseError::Syntax {
                        line: l0,
                        column: c0,
                        message: format!("unexpected character `{c}`"),
                    })
                }
            };
            bump(&mut i, &mut line, &mut col, c);
            push(&mut out, tok);
        }
    }
    out.push(Spanned { tok: Tok::Eof, line, column: col });
    Ok(out)
}

/// Surface syntax before interning.
#[derive(Debug, Clone)]
enum RawTerm {
    Var(String),
    App(String, Vec<RawTerm>),
}

#[derive(Debug, Clone)]
struct RawAtom {
    name: String,
    args: Vec<RawTerm>,
}

#[derive(Debug, Clone)]
struct RawClause {
    head: RawAtom,
    body: Vec<RawAtom>,
    has_neck: bool,
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, at: &Spanned, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax { line: at.line, column: at.column, message: message.into() })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        let t = self.next();
        if t.tok == tok {
            Ok(())
        } else {
            self.error(&t, format!("expected {what}, found {}", describe(&t.tok)))
        }
    }

    fn clauses(&mut self) -> Result<Vec<RawClause>, ParseError> {
        let mut out = Vec::new();
        while self.peek().tok != Tok::Eof {
            out.push(self.clause()?);
        }
        Ok(out)
    }

    fn clause(&mut self) -> Result<RawClause, ParseError> {
        let head = self.atom()?;
        let mut body = Vec::new();
        let has_neck = self.peek().tok == Tok::Neck;
        if has_neck {
            self.next();
            loop {
                body.push(self.atom()?);
                if self.peek().tok == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        let t = self.next();
        match t.tok {
            Tok::End => Ok(RawClause { head, body, has_neck }),
            Tok::Name(ref n) if n == "is" => Err(ParseError::NonDefinite {
                line: t.line,
                column: t.column,
                construct: "arithmetic `is`".into(),
            }),
            _ => self.error(&t, format!("expected `,` or `.`, found {}", describe(&t.tok))),
        }
    }

    fn atom(&mut self) -> Result<RawAtom, ParseError> {
        let t = self.next();
        if matches!(t.tok, Tok::Var(_) | Tok::Name(_)) && matches!(&self.peek().tok, Tok::Name(n) if n == "is") {
            let at = self.peek();
            return Err(ParseError::NonDefinite {
                line: at.line,
                column: at.column,
                construct: "arithmetic `is`".into(),
            });
        }
        let Tok::Name(name) = t.tok.clone() else {
            return self.error(&t, format!("expected an atom, found {}", describe(&t.tok)));
        };
        if name == "not" || name == "call" {
            return Err(ParseError::NonDefinite {
                line: t.line,
                column: t.column,
                construct: format!("meta-call `{name}`"),
            });
        }
        let args = if self.peek().tok == Tok::LParen { self.args()? } else { Vec::new() };
        Ok(RawAtom { name, args })
    }

    fn args(&mut self) -> Result<Vec<RawTerm>, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args = vec![self.term()?];
        while self.peek().tok == Tok::Comma {
            self.next();
            args.push(self.term()?);
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(args)
    }

    fn term(&mut self) -> Result<RawTerm, ParseError> {
        let t = self.next();
        match t.tok.clone() {
            Tok::Var(v) => Ok(RawTerm::Var(v)),
            Tok::Name(n) => {
                let args = if self.peek().tok == Tok::LParen { self.args()? } else { Vec::new() };
                Ok(RawTerm::App(n, args))
            }
            Tok::LBracket => {
                if self.peek().tok == Tok::RBracket {
                    self.next();
                    return Ok(RawTerm::App(NIL.into(), Vec::new()));
                }
                let mut items = vec![self.term()?];
                while self.peek().tok == Tok::Comma {
                    self.next();
                    items.push(self.term()?);
                }
                let tail = if self.peek().tok == Tok::Bar {
                    self.next();
                    self.term()?
                } else {
                    RawTerm::App(NIL.into(), Vec::new())
                };
                self.expect(Tok::RBracket, "`]`")?;
                Ok(items
                    .into_iter()
                    .rev()
                    .fold(tail, |acc, item| RawTerm::App(CONS.into(), vec![item, acc])))
            }
            other => self.error(&t, format!("expected a term, found {}", describe(&other))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Name(n) => format!("`{n}`"),
        Tok::Var(v) => format!("variable `{v}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::LBracket => "`[`".into(),
        Tok::RBracket => "`]`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Bar => "`|`".into(),
        Tok::Neck => "`:-`".into(),
        Tok::End => "end of clause".into(),
        Tok::Eof => "end of input".into(),
    }
}

struct Interner {
    symbols: Symbols,
    var_names: Vec<String>,
}

impl Interner {
    fn term(&mut self, t: &RawTerm, scope: &mut HashMap<String, VarId>) -> Term {
        match t {
            RawTerm::Var(name) => {
                if name == "_" {
                    return Term::Var(self.fresh(name));
                }
                if let Some(&v) = scope.get(name) {
                    return Term::Var(v);
                }
                let v = self.fresh(name);
                scope.insert(name.clone(), v);
                Term::Var(v)
            }
            RawTerm::App(name, args) => {
                let f = self.symbols.functor(name, args.len());
                Term::App(f, args.iter().map(|a| self.term(a, scope)).collect())
            }
        }
    }

    fn fresh(&mut self, name: &str) -> VarId {
        let v = VarId(self.var_names.len() as u32);
        self.var_names.push(name.to_owned());
        v
    }

    fn atom(&mut self, a: &RawAtom, scope: &mut HashMap<String, VarId>) -> Atom {
        let pred = self.symbols.pred(&a.name, a.args.len());
        Atom { pred, args: a.args.iter().map(|t| self.term(t, scope)).collect() }
    }
}

/// Parses a program file and extracts the query from a 0-arity predicate.
///
/// With `query_name` unset the predicate `main` is used when present,
/// otherwise the last 0-arity predicate defined by a rule.
pub fn parse_program(source: &str, query_name: Option<&str>) -> Result<(Program, Query), ParseError> {
    let raw = Parser { toks: lex(source)?, pos: 0 }.clauses()?;
    let is_query_rule = |c: &RawClause| c.head.args.is_empty() && c.has_neck;
    let name = match query_name {
        Some(n) => {
            if !raw.iter().any(|c| is_query_rule(c) && c.head.name == n) {
                return Err(ParseError::QueryNotFound(n.to_owned()));
            }
            n.to_owned()
        }
        None => {
            if raw.iter().any(|c| is_query_rule(c) && c.head.name == "main") {
                "main".to_owned()
            } else {
                raw.iter()
                    .rev()
                    .find(|c| is_query_rule(c))
                    .map(|c| c.head.name.clone())
                    .ok_or(ParseError::NoQuery)?
            }
        }
    };

    let mut interner = Interner { symbols: Symbols::default(), var_names: Vec::new() };
    let is_query = |rc: &RawClause| rc.head.args.is_empty() && rc.head.name == name;
    let mut clauses = Vec::new();
    for rc in raw.iter().filter(|rc| !is_query(rc)) {
        let mut scope = HashMap::new();
        let head = interner.atom(&rc.head, &mut scope);
        let body = rc.body.iter().map(|a| interner.atom(a, &mut scope)).collect();
        clauses.push(Clause { head, body });
    }
    // The query is interned last so that printing and re-parsing keeps ids stable.
    let query_clause = raw
        .iter()
        .find(|rc| is_query(rc) && rc.has_neck)
        .ok_or_else(|| ParseError::QueryNotFound(name.clone()))?;
    let mut scope = HashMap::new();
    let body = query_clause.body.iter().map(|a| interner.atom(a, &mut scope)).collect();

    let mut by_pred = vec![Vec::new(); interner.symbols.num_preds()];
    for (i, c) in clauses.iter().enumerate() {
        by_pred[c.head.pred.0 as usize].push(i);
    }
    let program = Program { symbols: interner.symbols, clauses, by_pred, var_names: interner.var_names };
    Ok((program, Query { name, body }))
}

/// Renders terms, atoms and whole programs back into the input grammar.
pub struct Printer<'a> {
    pub symbols: &'a Symbols,
    pub var_names: &'a [String],
}

impl Printer<'_> {
    fn var(&self, v: VarId, out: &mut String) {
        match self.var_names.get(v.0 as usize) {
            Some(n) if n != "_" => {
                let _ = write!(out, "{n}");
            }
            _ => {
                let _ = write!(out, "_G{}", v.0);
            }
        }
    }

    pub fn term(&self, t: &Term, out: &mut String) {
        match t {
            Term::Var(v) => self.var(*v, out),
            Term::App(f, args) => {
                let sym = self.symbols.functor_symbol(*f);
                if sym.name == CONS && args.len() == 2 {
                    return self.list(t, out);
                }
                if sym.name == NIL && args.is_empty() {
                    out.push_str("[]");
                    return;
                }
                out.push_str(&quote(&sym.name));
                self.args(args, out);
            }
        }
    }

    fn list(&self, t: &Term, out: &mut String) {
        out.push('[');
        let mut cur = t;
        let mut first = true;
        loop {
            match cur {
                Term::App(f, args) if args.len() == 2 && self.symbols.functor_symbol(*f).name == CONS => {
                    if !first {
                        out.push(',');
                    }
                    first = false;
                    self.term(&args[0], out);
                    cur = &args[1];
                }
                Term::App(f, args) if args.is_empty() && self.symbols.functor_symbol(*f).name == NIL => break,
                other => {
                    out.push('|');
                    self.term(other, out);
                    break;
                }
            }
        }
        out.push(']');
    }

    fn args(&self, args: &[Term], out: &mut String) {
        if args.is_empty() {
            return;
        }
        out.push('(');
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            self.term(a, out);
        }
        out.push(')');
    }

    pub fn atom(&self, a: &Atom, out: &mut String) {
        out.push_str(&quote(&self.symbols.pred_symbol(a.pred).name));
        self.args(&a.args, out);
    }

    pub fn clause(&self, c: &Clause) -> String {
        let mut out = String::new();
        self.atom(&c.head, &mut out);
        self.body(&c.body, &mut out);
        out
    }

    fn body(&self, body: &[Atom], out: &mut String) {
        if !body.is_empty() {
            out.push_str(" :- ");
            for (i, a) in body.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                self.atom(a, out);
            }
        }
        out.push('.');
    }

    pub fn program(&self, p: &Program, q: &Query) -> String {
        let mut out = String::new();
        for c in &p.clauses {
            out.push_str(&self.clause(c));
            out.push('\n');
        }
        out.push_str(&quote(&q.name));
        self.body(&q.body, &mut out);
        out.push('\n');
        out
    }
}

fn quote(name: &str) -> String {
    let plain = name.chars().next().is_some_and(|c| c.is_ascii_lowercase())
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    let number = !name.is_empty() && name.chars().all(|c| c.is_ascii_digit());
    if plain || number {
        name.to_owned()
    } else {
        format!("'{name}'")
    }
}

impl Program {
    pub fn printer(&self) -> Printer<'_> {
        Printer { symbols: &self.symbols, var_names: &self.var_names }
    }

    pub fn pretty(&self, q: &Query) -> String {
        self.printer().program(self, q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ODD_EVEN: &str = "even(zero). even(s(X)) :- odd(X). odd(s(X)) :- even(X). q :- even(X), even(s(X)).";

    fn names(sig: &Signature, p: &Program) -> (Vec<String>, Vec<String>) {
        let f = sig.functors.iter().map(|&f| p.symbols.functor_symbol(f).to_string()).collect();
        let q = sig.preds.iter().map(|&q| p.symbols.pred_symbol(q).to_string()).collect();
        (f, q)
    }

    #[test]
    fn parses_odd_even_with_named_query() {
        let (p, q) = parse_program(ODD_EVEN, Some("q")).unwrap();
        assert_eq!(p.clauses.len(), 3);
        assert_eq!(q.body.len(), 2);
        let mut s = String::new();
        p.printer().atom(&q.body[1], &mut s);
        assert_eq!(s, "even(s(X))");
    }

    #[test]
    fn default_query_is_last_zero_arity_rule() {
        let (_, q) = parse_program(ODD_EVEN, None).unwrap();
        assert_eq!(q.name, "q");
        let (_, q) = parse_program("main :- p. p :- q. other :- p.", None).unwrap();
        assert_eq!(q.name, "main");
    }

    #[test]
    fn missing_query_predicate() {
        assert_eq!(parse_program("p(a).", Some("p")), Err(ParseError::QueryNotFound("p".into())));
        assert_eq!(parse_program("p(a).", None), Err(ParseError::NoQuery));
    }

    #[test]
    fn signature_of_odd_even() {
        let (p, q) = parse_program(ODD_EVEN, None).unwrap();
        let (f, preds) = names(&collect_signature(&p, &q), &p);
        assert_eq!(f, vec!["zero/0", "s/1"]);
        assert_eq!(preds, vec!["even/1", "odd/1"]);
    }

    #[test]
    fn signature_of_query_only_program() {
        let (p, q) = parse_program("main :- p(X).", None).unwrap();
        let (f, preds) = names(&collect_signature(&p, &q), &p);
        assert!(f.is_empty());
        assert_eq!(preds, vec!["p/1"]);
        assert_eq!(p.undefined_preds().len(), 1);
    }

    #[test]
    fn same_name_at_two_arities_is_two_symbols() {
        let (p, q) = parse_program("p(f(a), f(a, b)). main :- p(X, Y).", None).unwrap();
        let (f, _) = names(&collect_signature(&p, &q), &p);
        assert_eq!(f, vec!["f/1", "a/0", "f/2", "b/0"]);
    }

    #[test]
    fn list_sugar_desugars_to_cons_and_nil() {
        let (p1, _) = parse_program("p([a]). p([X|Y]). p([a,b|T]). main :- p(Z).", None).unwrap();
        let (p2, _) = parse_program("p(cons(a,nil)). p(cons(X,Y)). p(cons(a,cons(b,T))). main :- p(Z).", None).unwrap();
        assert_eq!(p1.clauses, p2.clauses);
        assert_eq!(p1.symbols, p2.symbols);
    }

    #[test]
    fn variables_are_renamed_apart_per_clause() {
        let (p, q) = parse_program("p(X) :- q(X). q(X). main :- p(X), q(_), q(_).", None).unwrap();
        let v0 = p.clauses[0].vars();
        let v1 = p.clauses[1].vars();
        assert!(v0.iter().all(|v| !v1.contains(v)));
        assert_eq!(q.vars().len(), 3);
    }

    #[test]
    fn rejects_non_definite_constructs() {
        for src in ["p :- !.", "p :- \\+ q.", "p(X) :- X is 1.", "p(X) :- q(X) ; r(X).", "p :- not(q).", "p(X) :- X = a."] {
            match parse_program(src, None) {
                Err(ParseError::NonDefinite { .. }) => {}
                other => panic!("{src}: expected NonDefinite, got {other:?}"),
            }
        }
    }

    #[test]
    fn syntax_error_positions() {
        let err = parse_program("p(a).\nq(b :- r.", None).unwrap_err();
        assert_eq!(
            err,
            ParseError::Syntax { line: 2, column: 5, message: "expected `)`, found `:-`".into() }
        );
    }

    #[test]
    fn comments_and_numbers() {
        let (p, _) = parse_program("% header\neven(0). % zero\nmain :- even(0).", None).unwrap();
        assert_eq!(p.symbols.functor_symbol(FunctorId(0)).name, "0");
    }

    #[test]
    fn pretty_print_round_trips() {
        let src = "app([],L,L).\napp([H|X],Y,[H|Z]) :- app(X,Y,Z).\nlast([X],X).\nlast([H,H2|T],X) :- last([H2|T],X).\nappendlast :- app(X,[a],Xs), last(Xs,b), app(_,_,_).\n";
        let (p, q) = parse_program(src, None).unwrap();
        let printed = p.pretty(&q);
        let (p2, q2) = parse_program(&printed, None).unwrap();
        assert_eq!(p.clauses, p2.clauses);
        assert_eq!(q.body, q2.body);
        assert_eq!(p.symbols, p2.symbols);
    }
}
