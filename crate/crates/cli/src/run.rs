use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use log::info;
use prefail::abstraction::{abstract_compile, AbstractProgram};
use prefail::constraint::{self, ConstraintError};
use prefail::leastmodel::{verify_certificate, Certificate};
use prefail::oracle::{enumerate_preinterps, EnumerationOptions, OracleError, DEFAULT_CAP};
use prefail::search::{Outcome, SearchOptions, SearchResult, SearchStats, SeedOrder};
use prefail::solvers::SolverKind;
use prefail::syntax::{parse_program, ParseError, Program, Query};
use prefail::{abduce, preinterp::PreInterpretation};
use thiserror::Error;

use crate::report::{RunReport, SizeReport, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    #[default]
    Abduce,
    Constraint,
    Enumerate,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Abduce => "abduce",
            Engine::Constraint => "constraint",
            Engine::Enumerate => "enumerate",
        }
    }
}

fn solver_name(s: SolverKind) -> &'static str {
    match s {
        SolverKind::Abductive => "abductive",
        SolverKind::Fd => "fd",
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("invalid arguments: {0}")]
    Usage(String),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("internal error: certificate for {query} at n={n} does not verify: {reason}")]
    Verification { query: String, n: usize, reason: String },
}

impl RunError {
    /// 3 for bad input, 4 for failures inside the prover.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Io { .. } | RunError::Parse { .. } | RunError::Usage(_) => 3,
            _ => 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub file: PathBuf,
    /// Name of the 0-ary query predicate; the file's last query by default.
    pub query: Option<String>,
    /// Display name of the program; the file stem by default.
    pub name: Option<String>,
    pub engine: Engine,
    pub solver: SolverKind,
    pub min_domain_size: usize,
    pub max_domain_size: usize,
    pub symmetry: bool,
    pub intelligent_backtracking: bool,
    pub seed_order: SeedOrder,
    /// Budget for the whole run, over all sizes.
    pub timeout: Option<Duration>,
    /// Where to write the certificate of a proof.
    pub certificate: Option<PathBuf>,
    /// Enumeration engine: bound on the space size.
    pub cap: u128,
    /// Constraint engine with the FD solver: keep the final store's model.
    pub dump_encoding: bool,
}

impl RunConfig {
    pub fn new(file: impl Into<PathBuf>) -> Self {
        RunConfig {
            file: file.into(),
            query: None,
            name: None,
            engine: Engine::Abduce,
            solver: SolverKind::Abductive,
            min_domain_size: 1,
            max_domain_size: 3,
            symmetry: true,
            intelligent_backtracking: true,
            seed_order: SeedOrder::Fifo,
            timeout: None,
            certificate: None,
            cap: DEFAULT_CAP,
            dump_encoding: false,
        }
    }

    pub fn domain_size(mut self, n: usize) -> Self {
        self.min_domain_size = n;
        self.max_domain_size = n;
        self
    }
}

/// A parsed input program.
pub struct Loaded {
    pub source: String,
    pub program: Program,
    pub query: Query,
    pub abstracted: AbstractProgram,
}

pub fn load(path: &Path, query: Option<&str>) -> Result<Loaded, RunError> {
    let source = std::fs::read_to_string(path).map_err(|source| RunError::Io { path: path.to_owned(), source })?;
    let (program, query) = parse_program(&source, query).map_err(|source| RunError::Parse { path: path.to_owned(), source })?;
    let abstracted = abstract_compile(&program, &query);
    Ok(Loaded { source, program, query, abstracted })
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub certificate: Option<Certificate>,
    /// Per size tried, the finite-domain model of the final store
    /// (`dump_encoding` only).
    pub encodings: Vec<(usize, String)>,
}

/// Iterative deepening over the configured domain sizes until the query is
/// proven to fail. A proof is completed to a total pre-interpretation,
/// turned into a certificate and re-verified before it is reported.
pub fn run(config: &RunConfig) -> Result<RunOutput, RunError> {
    if config.min_domain_size == 0 || config.min_domain_size > config.max_domain_size {
        return Err(RunError::Usage(format!(
            "empty domain-size range {}..={}",
            config.min_domain_size, config.max_domain_size
        )));
    }
    if config.max_domain_size > prefail::preinterp::MAX_DOMAIN {
        return Err(RunError::Usage(format!("domain size above {}", prefail::preinterp::MAX_DOMAIN)));
    }
    let loaded = load(&config.file, config.query.as_deref())?;
    let ap = &loaded.abstracted;
    let start = Instant::now();
    let deadline = config.timeout.map(|t| start + t);
    let mut totals = SearchStats::default();
    let mut sizes = Vec::new();
    let mut encodings = Vec::new();
    let mut verdict = Verdict::NoProofAtSizes;
    let mut proof = None;
    let mut last_n = config.min_domain_size;
    for n in config.min_domain_size..=config.max_domain_size {
        last_n = n;
        let opts = SearchOptions {
            intelligent_backtracking: config.intelligent_backtracking,
            symmetry: config.symmetry,
            seed_order: config.seed_order,
            deadline,
        };
        let t = Instant::now();
        let result = match config.engine {
            Engine::Abduce => abduce::solve(ap, n, &opts),
            Engine::Constraint if config.dump_encoding && config.solver == SolverKind::Fd => {
                let (r, text) = constraint::solve_with_encoding(ap, n, &opts)?;
                encodings.push((n, text));
                r
            }
            Engine::Constraint => constraint::solve(ap, n, &opts, config.solver)?,
            Engine::Enumerate => enumerate(ap, n, config.cap)?,
        };
        let backtracks = engine_backtracks(config.engine, &result.stats);
        add_stats(&mut totals, &result.stats);
        let outcome = match &result.outcome {
            Outcome::Solution(_) => "solution",
            Outcome::Exhausted => "exhausted",
            Outcome::Timeout => "timeout",
        };
        info!("{} n={n}: {outcome}", ap.query_name);
        sizes.push(SizeReport { n, outcome, backtracks, time_ms: millis(t.elapsed()) });
        match result.outcome {
            Outcome::Solution(j) => {
                verdict = Verdict::FailureProven;
                proof = Some(certify(&loaded, j)?);
                break;
            }
            Outcome::Exhausted => {}
            Outcome::Timeout => {
                verdict = Verdict::Timeout;
                break;
            }
        }
    }
    let mut cert_path = None;
    if let (Some(cert), Some(path)) = (&proof, &config.certificate) {
        std::fs::write(path, cert.to_text()).map_err(|source| RunError::Io { path: path.clone(), source })?;
        cert_path = Some(path.display().to_string());
    }
    let name = config.name.clone().unwrap_or_else(|| {
        config.file.file_stem().map_or_else(|| ap.query_name.clone(), |s| s.to_string_lossy().into_owned())
    });
    let report = RunReport {
        program: name,
        file: config.file.display().to_string(),
        query: ap.query_name.clone(),
        engine: config.engine.name(),
        solver: (config.engine == Engine::Constraint).then(|| solver_name(config.solver)),
        clauses: loaded.program.clauses.len(),
        predicates: loaded.program.num_defined_preds(),
        functors: ap.symbols.num_functors(),
        domain_size: last_n,
        size_pre: ap.preinterp_size(last_n),
        size_int: ap.interp_size(last_n),
        verdict,
        certificate: cert_path,
        backtracks: engine_backtracks(config.engine, &totals),
        table_backtracks: totals.rule5_backtracks,
        abductions: totals.abductions,
        primary_conflicts: totals.primary_conflicts,
        secondary_conflicts: totals.secondary_conflicts,
        symmetry_rejections: totals.symmetry_rejections,
        derived_clauses: totals.clauses,
        time_ms: millis(start.elapsed()),
        sizes,
    };
    Ok(RunOutput { report, certificate: proof, encodings })
}

fn certify(loaded: &Loaded, j: PreInterpretation) -> Result<Certificate, RunError> {
    let n = j.size();
    let cert = Certificate::new(&loaded.source, &loaded.abstracted.query_name, &loaded.abstracted.symbols, &j.completed());
    let fail = |reason: String| RunError::Verification { query: loaded.abstracted.query_name.clone(), n, reason };
    match verify_certificate(&loaded.source, &cert) {
        Ok(Ok(())) => Ok(cert),
        Ok(Err(rejection)) => Err(fail(rejection.to_string())),
        Err(e) => Err(fail(e.to_string())),
    }
}

fn enumerate(ap: &AbstractProgram, n: usize, cap: u128) -> Result<SearchResult, RunError> {
    let opts = EnumerationOptions { cap, count_only: true, max_witnesses: 1 };
    let report = enumerate_preinterps(ap, n, opts)?;
    let outcome = match report.witnesses.into_iter().next() {
        Some(j) => Outcome::Solution(j),
        None => Outcome::Exhausted,
    };
    Ok(SearchResult { outcome, stats: SearchStats::default() })
}

/// The backtrack count reported for an engine: value retractions for the
/// abductive engine, solver backtracks for the constraint engine.
fn engine_backtracks(engine: Engine, s: &SearchStats) -> u64 {
    match engine {
        Engine::Constraint => s.solver_backtracks,
        _ => s.backtracks,
    }
}

fn add_stats(total: &mut SearchStats, s: &SearchStats) {
    total.backtracks += s.backtracks;
    total.primary_conflicts += s.primary_conflicts;
    total.secondary_conflicts += s.secondary_conflicts;
    total.symmetry_rejections += s.symmetry_rejections;
    total.abductions += s.abductions;
    total.clauses += s.clauses;
    total.max_depth = total.max_depth.max(s.max_depth);
    total.solver_backtracks += s.solver_backtracks;
    total.rule5_backtracks += s.rule5_backtracks;
}

fn millis(d: Duration) -> f64 {
    (d.as_secs_f64() * 1e6).round() / 1e3
}
