#![allow(dead_code)]

use std::path::PathBuf;

use prefail::abstraction::{abstract_compile, AbstractProgram};
use prefail::preinterp::{Permutation, PreInterpretation};
use prefail::syntax::{parse_program, Program, Query};

/// Every corpus file, by stem.
pub const CORPUS: [&str; 16] = [
    "odd_even",
    "wicked_oe",
    "even_odd",
    "appendlast",
    "reverselast",
    "nreverselast",
    "schedule",
    "multiseto",
    "multisetl",
    "blockpair2o",
    "blockpair3o",
    "blockpair2l",
    "blockpair3l",
    "blocksol",
    "BOO019-1",
    "less",
];

pub struct Loaded {
    pub source: String,
    pub program: Program,
    pub query: Query,
    pub ap: AbstractProgram,
}

pub fn corpus_path(stem: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(format!("{stem}.pl"))
}

pub fn load(stem: &str) -> Loaded {
    let source = std::fs::read_to_string(corpus_path(stem)).unwrap();
    let (program, query) = parse_program(&source, None).unwrap();
    let ap = abstract_compile(&program, &query);
    Loaded { source, program, query, ap }
}

pub fn parse(source: &str) -> Loaded {
    let (program, query) = parse_program(source, None).unwrap();
    let ap = abstract_compile(&program, &query);
    Loaded { source: source.to_owned(), program, query, ap }
}

/// Whether some domain permutation maps `a` onto `b`.
pub fn isomorphic(a: &PreInterpretation, b: &PreInterpretation) -> bool {
    a.size() == b.size() && Permutation::all(a.size()).iter().any(|p| &a.apply_permutation(p) == b)
}
