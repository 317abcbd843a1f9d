//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line to
//! stderr (visible without `--nocapture`) and fails when the criterion does.
//! Budgets are wall-clock limits per run; timings are not otherwise checked.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::Command;
use std::time::Duration;

use prefail::leastmodel::{verify_certificate, Certificate};
use prefail::oracle::{direct_least_model, enumerate_interpretations, enumerate_preinterps, ground, EnumerationOptions, DEFAULT_CAP};
use prefail::preinterp::{Elem, PreInterpretation};
use prefail::solvers::SolverKind;
use prefail::syntax::FunctorId;
use prefail_cli::run::load;
use prefail_cli::{run, Engine, Manifest, RunConfig, RunReport, Verdict};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rayon::prelude::*;

const PROVEN_BUDGET: Duration = Duration::from_secs(120);
const PARITY_BUDGET: Duration = Duration::from_secs(300);
const BLOCKSOL_BUDGET: Duration = Duration::from_secs(3600);
const LESS_BUDGET: Duration = Duration::from_secs(10);
const NREVERSE_PROBE: Duration = Duration::from_secs(5);
const ODD_EVEN_BACKTRACKS: std::ops::RangeInclusive<u64> = 0..=10;
const WICKED_FACTOR: u64 = 4;
const RANDOM_TABLES: u32 = 50;

/// Programs and domain sizes at which the abductive engine must prove failure.
const PROVEN: [(&str, usize); 12] = [
    ("odd_even", 2),
    ("wicked_oe", 2),
    ("appendlast", 3),
    ("reverselast", 3),
    ("schedule", 3),
    ("multiseto", 2),
    ("multisetl", 2),
    ("blockpair2o", 2),
    ("blockpair3o", 2),
    ("blockpair2l", 2),
    ("blockpair3l", 2),
    ("BOO019-1", 3),
];

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn manifest() -> Manifest {
    Manifest::load(&corpus_dir().join("manifest.toml")).unwrap()
}

fn config(stem: &str, n: usize, engine: Engine, solver: SolverKind, budget: Duration) -> RunConfig {
    let mut c = RunConfig::new(corpus_dir().join(format!("{stem}.pl"))).domain_size(n);
    c.engine = engine;
    c.solver = solver;
    c.timeout = Some(budget);
    c
}

fn report(id: u32, failures: &[String], summary: &str) {
    let mut err = std::io::stderr().lock();
    if failures.is_empty() {
        let _ = writeln!(err, "criterion {id}: PASS  {summary}");
    } else {
        let _ = writeln!(err, "criterion {id}: FAIL  {summary}");
        for f in failures {
            let _ = writeln!(err, "    {f}");
        }
    }
    assert!(failures.is_empty(), "criterion {id} failed: {failures:#?}");
}

/// Checks a proof without the abstracted program: the certificate's table is
/// used to ground the original program, whose least model must falsify the query.
fn independently_verified(stem: &str, r: &RunReport, cert: &Certificate) -> Result<(), String> {
    let file = corpus_dir().join(format!("{stem}.pl"));
    let source = std::fs::read_to_string(&file).unwrap();
    let reparsed = Certificate::parse(&cert.to_text()).map_err(|e| e.to_string())?;
    verify_certificate(&source, &reparsed).map_err(|e| e.to_string())?.map_err(|e| e.to_string())?;
    let l = load(&file, Some(&r.query)).map_err(|e| e.to_string())?;
    let j = reparsed.preinterp(&l.program.symbols).map_err(|e| e.to_string())?;
    let g = ground(&l.program, &l.query, &j);
    if g.query_true(&g.least_model()) {
        return Err("query holds in the grounded least model".into());
    }
    Ok(())
}

fn expect_verdict(stem: &str, c: &RunConfig, want: Verdict, budget: Duration, failures: &mut Vec<String>) -> Option<RunReport> {
    let what = format!("{stem} n={} {}{}", c.min_domain_size, c.engine.name(), if c.engine == Engine::Constraint { format!("/{:?}", c.solver) } else { String::new() });
    match run(c) {
        Ok(out) => {
            let r = out.report;
            if r.verdict != want {
                failures.push(format!("{what}: {:?}, expected {want:?}", r.verdict));
            } else if r.time_ms > budget.as_secs_f64() * 1e3 {
                failures.push(format!("{what}: {:.1} s over budget", r.time_ms / 1e3));
            } else if want == Verdict::FailureProven {
                match out.certificate.as_ref().map(|cert| independently_verified(stem, &r, cert)) {
                    Some(Ok(())) => {}
                    Some(Err(e)) => failures.push(format!("{what}: certificate: {e}")),
                    None => failures.push(format!("{what}: no certificate")),
                }
            }
            Some(r)
        }
        Err(e) => {
            failures.push(format!("{what}: {e}"));
            None
        }
    }
}

#[test]
fn criterion_1_abductive_engine_proves_the_corpus() {
    let mut failures = Vec::new();
    let mut slowest = 0f64;
    for (stem, n) in PROVEN {
        let c = config(stem, n, Engine::Abduce, SolverKind::Abductive, PROVEN_BUDGET);
        if let Some(r) = expect_verdict(stem, &c, Verdict::FailureProven, PROVEN_BUDGET, &mut failures) {
            slowest = slowest.max(r.time_ms);
        }
    }
    report(1, &failures, &format!("12 programs proven with verified certificates, slowest {:.2} s (budget 120 s)", slowest / 1e3));
}

#[test]
fn criterion_2_constraint_engine_parity() {
    let mut failures = Vec::new();
    let mut slowest = 0f64;
    for solver in [SolverKind::Abductive, SolverKind::Fd] {
        for (stem, n) in PROVEN {
            let c = config(stem, n, Engine::Constraint, solver, PARITY_BUDGET);
            if let Some(r) = expect_verdict(stem, &c, Verdict::FailureProven, PARITY_BUDGET, &mut failures) {
                slowest = slowest.max(r.time_ms);
            }
        }
    }
    report(2, &failures, &format!("both solvers prove all 12, slowest {:.2} s (budget 300 s)", slowest / 1e3));
}

#[test]
fn criterion_3_negative_cases_are_exhausted() {
    let mut failures = Vec::new();
    let c = config("blocksol", 2, Engine::Abduce, SolverKind::Abductive, BLOCKSOL_BUDGET);
    let blocksol = expect_verdict("blocksol", &c, Verdict::NoProofAtSizes, BLOCKSOL_BUDGET, &mut failures);
    let mut less_slowest = 0f64;
    for n in 1..=3 {
        for (engine, solver) in [(Engine::Abduce, SolverKind::Abductive), (Engine::Constraint, SolverKind::Abductive), (Engine::Constraint, SolverKind::Fd)] {
            let c = config("less", n, engine, solver, LESS_BUDGET);
            if let Some(r) = expect_verdict("less", &c, Verdict::NoProofAtSizes, LESS_BUDGET, &mut failures) {
                less_slowest = less_slowest.max(r.time_ms);
            }
        }
    }
    let b = blocksol.map_or(String::from("-"), |r| format!("{:.1} s, {} backtracks", r.time_ms / 1e3, r.backtracks));
    report(3, &failures, &format!("blocksol n=2 exhausted ({b}; budget 1 h); less n=1..3 exhausted, slowest {:.3} s (budget 10 s)", less_slowest / 1e3));
}

#[test]
fn criterion_4_nreverselast_is_opt_in() {
    let mut failures = Vec::new();
    let m = manifest();
    match m.get("nreverselast") {
        Some(e) if e.long_running && e.domain_size == 5 => {}
        _ => failures.push("manifest does not mark nreverselast (n=5) long-running".into()),
    }
    if m.programs.iter().filter(|e| e.long_running).any(|e| e.name != "nreverselast" && e.name != "blocksol") {
        failures.push("unexpected long-running entries".into());
    }
    let c = config("nreverselast", 5, Engine::Abduce, SolverKind::Abductive, NREVERSE_PROBE);
    match run(&c) {
        Ok(out) if out.report.verdict == Verdict::Timeout => {}
        Ok(out) => failures.push(format!("short probe ended with {:?}", out.report.verdict)),
        Err(e) => failures.push(e.to_string()),
    }
    report(4, &failures, "nreverselast excluded from default runs; times out under a 5 s probe; full run is the ignored test `nreverselast_fails_at_five`");
}

/// Takes about 40 minutes in a release build.
#[test]
#[ignore]
fn nreverselast_fails_at_five() {
    let budget = Duration::from_secs(4 * 3600);
    let mut failures = Vec::new();
    let c = config("nreverselast", 5, Engine::Abduce, SolverKind::Abductive, budget);
    let r = expect_verdict("nreverselast", &c, Verdict::FailureProven, budget, &mut failures);
    let t = r.map_or(String::from("-"), |r| format!("{:.0} s", r.time_ms / 1e3));
    report(4, &failures, &format!("opt-in: nreverselast n=5 proven in {t}"));
}

/// odd_even's failing tables over two elements, counted with a hand-written
/// fixpoint for `even(0). even(s(X)) :- odd(X). odd(s(X)) :- even(X).`
fn odd_even_failing_by_hand() -> (u64, u64) {
    let (mut total, mut failing) = (0, 0);
    for zero in 0..2usize {
        for s in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            total += 1;
            let (mut even, mut odd) = ([false; 2], [false; 2]);
            even[zero] = true;
            for _ in 0..4 {
                for x in 0..2 {
                    even[s[x]] |= odd[x];
                    odd[s[x]] |= even[x];
                }
            }
            failing += !(0..2).any(|x| even[x] && even[s[x]]) as u64;
        }
    }
    (total, failing)
}

#[test]
fn criterion_5_engines_agree_with_enumeration() {
    let mut failures = Vec::new();
    let cases = [("odd_even", 2), ("wicked_oe", 2), ("multiseto", 2), ("multisetl", 2), ("odd_even", 3), ("appendlast", 3)];
    for (stem, n) in cases {
        let l = load(&corpus_dir().join(format!("{stem}.pl")), None).unwrap();
        let opts = EnumerationOptions { cap: DEFAULT_CAP, count_only: true, max_witnesses: 0 };
        let count = match enumerate_preinterps(&l.abstracted, n, opts) {
            Ok(r) => r.failing,
            Err(e) => {
                failures.push(format!("{stem} n={n}: {e}"));
                continue;
            }
        };
        for (engine, solver) in [(Engine::Abduce, SolverKind::Abductive), (Engine::Constraint, SolverKind::Abductive), (Engine::Constraint, SolverKind::Fd)] {
            let want = if count > 0 { Verdict::FailureProven } else { Verdict::NoProofAtSizes };
            let c = config(stem, n, engine, solver, PARITY_BUDGET);
            expect_verdict(stem, &c, want, PARITY_BUDGET, &mut failures);
        }
    }
    let l = load(&corpus_dir().join("odd_even.pl"), None).unwrap();
    let rep = enumerate_preinterps(&l.abstracted, 2, EnumerationOptions::default()).unwrap();
    let (total, failing) = odd_even_failing_by_hand();
    if (rep.space_size, rep.failing) != (total as u128, failing) {
        failures.push(format!("odd_even n=2: oracle {}/{} vs hand count {failing}/{total}", rep.failing, rep.space_size));
    }
    report(5, &failures, &format!("6 cases x 3 engines match enumeration; odd_even n=2 fails under {failing} of {total} tables"));
}

fn total_table(n: usize, arities: &[usize], cells: &[u8]) -> PreInterpretation {
    let mut j = PreInterpretation::new(n, arities.to_vec());
    let mut it = cells.iter();
    for (f, &k) in arities.iter().enumerate() {
        for i in 0..n.pow(k as u32) {
            j.set_index(FunctorId(f as u32), i, Some(Elem(*it.next().unwrap())));
        }
    }
    j
}

#[test]
fn criterion_6_abstraction_preserves_least_models() {
    let mut failures = Vec::new();
    let m = manifest();
    for e in &m.programs {
        let l = load(&m.path_of(e), Some(&e.query)).unwrap();
        let arities = l.abstracted.arities();
        let strategy = (1..=3usize).prop_flat_map(move |n| {
            let cells: usize = arities.iter().map(|&k| n.pow(k as u32)).sum();
            let arities = arities.clone();
            proptest::collection::vec(0..n as u8, cells).prop_map(move |c| total_table(n, &arities, &c))
        });
        let mut runner = TestRunner::new(Config { cases: RANDOM_TABLES, failure_persistence: None, ..Config::default() });
        let result = runner.run(&strategy, |j| {
            let direct = direct_least_model(&l.program, &l.query, &j);
            let abstracted = prefail::leastmodel::least_model(&l.abstracted, &j);
            prop_assert_eq!(direct.atoms(), abstracted.atoms());
            Ok(())
        });
        if let Err(err) = result {
            failures.push(format!("{}: {err}", e.name));
        }
    }
    report(6, &failures, &format!("{} programs x {RANDOM_TABLES} random tables, n <= 3: least models equal", m.programs.len()));
}

#[test]
fn criterion_7_ablations_keep_verdicts() {
    let mut failures = Vec::new();
    let mut cases: Vec<(&str, usize, Verdict)> = PROVEN.iter().map(|&(s, n)| (s, n, Verdict::FailureProven)).collect();
    cases.extend([("blocksol", 2, Verdict::NoProofAtSizes), ("less", 1, Verdict::NoProofAtSizes), ("less", 2, Verdict::NoProofAtSizes), ("less", 3, Verdict::NoProofAtSizes)]);
    let mut jobs = Vec::new();
    for (symmetry, ib) in [(false, true), (true, false), (false, false)] {
        for engine in [Engine::Abduce, Engine::Constraint] {
            for &(stem, n, want) in &cases {
                let budget = if stem == "blocksol" { BLOCKSOL_BUDGET } else { PARITY_BUDGET };
                let mut c = config(stem, n, engine, SolverKind::Abductive, budget);
                c.symmetry = symmetry;
                c.intelligent_backtracking = ib;
                jobs.push((stem, c, want, budget));
            }
        }
    }
    let runs = jobs.len();
    let found: Vec<Vec<String>> = jobs
        .par_iter()
        .map(|(stem, c, want, budget)| {
            let mut f = Vec::new();
            expect_verdict(stem, c, *want, *budget, &mut f);
            f
        })
        .collect();
    failures.extend(found.into_iter().flatten());
    let bt = |stem: &str| {
        let c = config(stem, 2, Engine::Abduce, SolverKind::Abductive, PROVEN_BUDGET);
        run(&c).unwrap().report.sizes.last().unwrap().backtracks
    };
    let (oe, woe) = (bt("odd_even"), bt("wicked_oe"));
    if !ODD_EVEN_BACKTRACKS.contains(&oe) {
        failures.push(format!("odd_even: {oe} backtracks, expected {ODD_EVEN_BACKTRACKS:?}"));
    }
    if woe > WICKED_FACTOR * oe {
        failures.push(format!("wicked_oe: {woe} backtracks, more than {WICKED_FACTOR} x odd_even's {oe}"));
    }
    report(7, &failures, &format!("{runs} ablated runs keep their verdicts; backtracks at n=2: odd_even {oe}, wicked_oe {woe}"));
}

#[test]
fn criterion_8_models_exist_exactly_when_least_models_falsify() {
    let mut failures = Vec::new();
    let mut checked = 0;
    for stem in ["odd_even", "multiseto", "multisetl"] {
        let l = load(&corpus_dir().join(format!("{stem}.pl")), None).unwrap();
        match enumerate_interpretations(&l.program, &l.query, &l.abstracted, 2, DEFAULT_CAP) {
            Ok(checks) => {
                checked += checks.len();
                let bad = checks.iter().filter(|c| !c.consistent()).count();
                if bad > 0 {
                    failures.push(format!("{stem}: {bad} tables disagree"));
                }
            }
            Err(e) => failures.push(format!("{stem}: {e}")),
        }
    }
    report(8, &failures, &format!("odd_even, multiseto, multisetl at n=2: {checked} tables checked"));
}

fn bench_untimed(engine: &str) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_prefail"))
        .args(["bench", "--jsonl", "--engine", engine, "--manifest"])
        .arg(corpus_dir().join("manifest.toml"))
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.code() != Some(0) {
        return Err(format!("bench --engine {engine} exited with {:?}", out.status.code()));
    }
    let mut lines = String::new();
    for line in String::from_utf8_lossy(&out.stdout).lines() {
        let mut v: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        strip_time(&mut v);
        lines += &v.to_string();
        lines.push('\n');
    }
    Ok(lines)
}

fn strip_time(v: &mut serde_json::Value) {
    if let Some(m) = v.as_object_mut() {
        m.remove("time_ms");
        m.values_mut().for_each(strip_time);
    } else if let Some(a) = v.as_array_mut() {
        a.iter_mut().for_each(strip_time);
    }
}

#[test]
fn criterion_9_bench_reports_are_reproducible() {
    let mut failures = Vec::new();
    let mut records = 0;
    for engine in ["abduce", "constraint"] {
        match (bench_untimed(engine), bench_untimed(engine)) {
            (Ok(a), Ok(b)) if a == b => records += a.lines().count(),
            (Ok(_), Ok(_)) => failures.push(format!("{engine}: reports differ")),
            (Err(e), _) | (_, Err(e)) => failures.push(e),
        }
    }
    report(9, &failures, &format!("two bench runs per engine give identical untimed reports ({records} records)"));
}
