use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use prefail::leastmodel::{verify_certificate, Certificate};
use prefail::oracle::{enumerate_interpretations, enumerate_preinterps, EnumerationOptions};
use prefail::preinterp::PreInterpretation;
use prefail::search::SeedOrder;
use prefail::solvers::SolverKind;
use prefail_cli::report::table;
use prefail_cli::run::load;
use prefail_cli::{run, Engine, Expect, Manifest, RunConfig, RunError, RunReport, Verdict};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "prefail", version, about = "Prove that a definite logic program query fails, by finding a finite pre-interpretation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a pre-interpretation under which the query fails.
    Run(RunArgs),
    /// Run every program of a corpus manifest at its domain size.
    Bench(BenchArgs),
    /// Check a certificate against a program.
    Verify { file: PathBuf, certificate: PathBuf },
    /// Exhaustively enumerate pre-interpretations of one size.
    Enumerate(EnumerateArgs),
    /// Print the abstracted program.
    DumpAbstract {
        file: PathBuf,
        #[arg(long)]
        query: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Abduce,
    Constraint,
    Enumerate,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Abductive,
    Fd,
}

#[derive(Clone, Copy, ValueEnum)]
enum SeedOrderArg {
    Fifo,
    Lifo,
}

#[derive(Args, Clone)]
struct SearchArgs {
    #[arg(long, value_enum, default_value = "abduce")]
    engine: EngineArg,
    /// Store solver of the constraint engine.
    #[arg(long, value_enum, default_value = "abductive")]
    solver: SolverArg,
    #[arg(long, value_enum, default_value = "fifo")]
    seed_order: SeedOrderArg,
    #[arg(long)]
    no_intelligent_backtracking: bool,
    #[arg(long)]
    no_symmetry: bool,
    /// Space bound of the enumeration engine.
    #[arg(long, default_value_t = prefail::oracle::DEFAULT_CAP)]
    cap: u128,
}

#[derive(Args)]
struct RunArgs {
    file: PathBuf,
    /// Query predicate (0-ary); defaults to the last one in the file.
    #[arg(long)]
    query: Option<String>,
    #[command(flatten)]
    search: SearchArgs,
    /// Try only this domain size.
    #[arg(long, conflicts_with = "max_domain_size")]
    domain_size: Option<usize>,
    /// Try sizes 1..=N in turn.
    #[arg(long, default_value_t = 3)]
    max_domain_size: usize,
    /// Budget in seconds for the whole run.
    #[arg(long, default_value_t = 120.0)]
    timeout: f64,
    /// Write the certificate of a proof here.
    #[arg(long)]
    certificate: Option<PathBuf>,
    /// Print search statistics.
    #[arg(long)]
    stats: bool,
    /// Print the report as one JSON line.
    #[arg(long)]
    json: bool,
    /// Print the finite-domain model of the final store (constraint engine, fd solver).
    #[arg(long)]
    dump_encoding: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "corpus/manifest.toml")]
    manifest: PathBuf,
    #[command(flatten)]
    search: SearchArgs,
    /// Budget in seconds per program.
    #[arg(long, default_value_t = 300.0)]
    timeout: f64,
    /// Only these programs (repeatable).
    #[arg(long)]
    only: Vec<String>,
    /// Include programs marked long-running.
    #[arg(long)]
    include_long: bool,
    /// Write the JSON-lines report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Print JSON lines instead of the table.
    #[arg(long)]
    jsonl: bool,
    /// Programs run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct EnumerateArgs {
    file: PathBuf,
    #[arg(long)]
    query: Option<String>,
    #[arg(long)]
    domain_size: usize,
    /// Skip isomorphism classes and witnesses.
    #[arg(long)]
    count_only: bool,
    #[arg(long, default_value_t = prefail::oracle::DEFAULT_CAP)]
    cap: u128,
    /// Also count models over full interpretations, per pre-interpretation.
    #[arg(long)]
    interpretations: bool,
}

fn config(file: PathBuf, s: &SearchArgs, timeout: f64) -> Result<RunConfig, RunError> {
    if !(timeout > 0.0 && timeout.is_finite()) {
        return Err(RunError::Usage(format!("timeout must be positive, got {timeout}")));
    }
    let mut c = RunConfig::new(file);
    c.engine = match s.engine {
        EngineArg::Abduce => Engine::Abduce,
        EngineArg::Constraint => Engine::Constraint,
        EngineArg::Enumerate => Engine::Enumerate,
    };
    c.solver = match s.solver {
        SolverArg::Abductive => SolverKind::Abductive,
        SolverArg::Fd => SolverKind::Fd,
    };
    c.seed_order = match s.seed_order {
        SeedOrderArg::Fifo => SeedOrder::Fifo,
        SeedOrderArg::Lifo => SeedOrder::Lifo,
    };
    c.intelligent_backtracking = !s.no_intelligent_backtracking;
    c.symmetry = !s.no_symmetry;
    c.cap = s.cap;
    c.timeout = Some(Duration::from_secs_f64(timeout));
    Ok(c)
}

fn cmd_run(a: RunArgs) -> Result<i32, RunError> {
    let mut c = config(a.file, &a.search, a.timeout)?;
    c.query = a.query;
    c.certificate = a.certificate;
    c.dump_encoding = a.dump_encoding;
    if a.dump_encoding && !(c.engine == Engine::Constraint && c.solver == SolverKind::Fd) {
        return Err(RunError::Usage("--dump-encoding needs --engine constraint --solver fd".into()));
    }
    match a.domain_size {
        Some(n) => c = c.domain_size(n),
        None => c.max_domain_size = a.max_domain_size,
    }
    let out = run(&c)?;
    let r = &out.report;
    for (n, text) in &out.encodings {
        println!("% final store at n={n}");
        print!("{text}");
    }
    if a.json {
        println!("{}", r.to_json_line());
        return Ok(r.verdict.exit_code());
    }
    match r.verdict {
        Verdict::FailureProven => println!("{}: failure proven at n={} ({:.2} s)", r.query, r.domain_size, r.time_ms / 1000.0),
        Verdict::NoProofAtSizes => println!("{}: no failing pre-interpretation up to n={} ({:.2} s)", r.query, r.domain_size, r.time_ms / 1000.0),
        Verdict::Timeout => println!("{}: timeout at n={} ({:.2} s)", r.query, r.domain_size, r.time_ms / 1000.0),
    }
    if let Some(cert) = &out.certificate {
        for line in &cert.components {
            println!("  {line}");
        }
        if let Some(p) = &r.certificate {
            println!("certificate written to {p}");
        }
    }
    if a.stats {
        println!("backtracks          {}", r.backtracks);
        if r.engine == "constraint" {
            println!("table backtracks    {}", r.table_backtracks);
        }
        println!("abductions          {}", r.abductions);
        println!("primary conflicts   {}", r.primary_conflicts);
        println!("secondary conflicts {}", r.secondary_conflicts);
        println!("symmetry rejections {}", r.symmetry_rejections);
        println!("derived clauses     {}", r.derived_clauses);
        for s in &r.sizes {
            println!("n={} {} backtracks={} time={:.3}s", s.n, s.outcome, s.backtracks, s.time_ms / 1000.0);
        }
    }
    Ok(r.verdict.exit_code())
}

fn cmd_bench(a: BenchArgs) -> Result<i32, RunError> {
    let manifest = Manifest::load(&a.manifest).map_err(|e| RunError::Usage(e.to_string()))?;
    for name in &a.only {
        if manifest.get(name).is_none() {
            return Err(RunError::Usage(format!("no program `{name}` in {}", a.manifest.display())));
        }
    }
    let base = config(PathBuf::new(), &a.search, a.timeout)?;
    let entries: Vec<_> = manifest
        .programs
        .iter()
        .filter(|e| if a.only.is_empty() { a.include_long || !e.long_running } else { a.only.contains(&e.name) })
        .collect();
    let one = |e: &&prefail_cli::Entry| -> (String, Expect, Result<RunReport, RunError>) {
        let mut c = base.clone().domain_size(e.domain_size);
        c.file = manifest.path_of(e);
        c.query = Some(e.query.clone());
        c.name = Some(e.name.clone());
        (e.name.clone(), e.expect, run(&c).map(|o| o.report))
    };
    let results: Vec<_> = if a.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(a.jobs).build().map_err(|e| RunError::Usage(e.to_string()))?;
        pool.install(|| entries.par_iter().map(one).collect())
    } else {
        entries.iter().map(one).collect()
    };
    let mut reports = Vec::new();
    let mut all_expected = true;
    for (name, expect, r) in results {
        match r {
            Ok(r) => {
                let want = match expect {
                    Expect::Proven => Verdict::FailureProven,
                    Expect::Exhausted => Verdict::NoProofAtSizes,
                };
                all_expected &= r.verdict == want;
                reports.push(r);
            }
            Err(e) => {
                all_expected = false;
                eprintln!("{name}: {e}");
            }
        }
    }
    let lines: String = reports.iter().map(|r| r.to_json_line() + "\n").collect();
    if let Some(path) = &a.report {
        std::fs::write(path, &lines).map_err(|source| RunError::Io { path: path.clone(), source })?;
    }
    if a.jsonl {
        print!("{lines}");
    } else {
        print!("{}", table(&reports));
    }
    Ok(if all_expected { 0 } else { 1 })
}

fn read(path: &Path) -> Result<String, RunError> {
    std::fs::read_to_string(path).map_err(|source| RunError::Io { path: path.to_owned(), source })
}

fn cmd_verify(file: PathBuf, cert: PathBuf) -> Result<i32, RunError> {
    let source = read(&file)?;
    let cert = Certificate::parse(&read(&cert)?).map_err(|e| RunError::Usage(format!("{}: {e}", cert.display())))?;
    match verify_certificate(&source, &cert) {
        Ok(Ok(())) => {
            println!("valid: {} fails under the certified pre-interpretation (n={})", cert.query, cert.domain_size);
            Ok(0)
        }
        Ok(Err(r)) => {
            println!("rejected: {r}");
            Ok(1)
        }
        Err(e) => Err(RunError::Usage(e.to_string())),
    }
}

fn cmd_enumerate(a: EnumerateArgs) -> Result<i32, RunError> {
    let loaded = load(&a.file, a.query.as_deref())?;
    let ap = &loaded.abstracted;
    let opts = EnumerationOptions { cap: a.cap, count_only: a.count_only, ..Default::default() };
    let rep = enumerate_preinterps(ap, a.domain_size, opts)?;
    println!("domain size         {}", rep.domain_size);
    println!("pre-interpretations {}", rep.space_size);
    println!("failing             {}", rep.failing);
    if let Some(c) = rep.iso_classes {
        println!("failing classes     {c}");
        for (i, j) in rep.witnesses.iter().enumerate() {
            println!("witness {i}: {}", j.render(&ap.symbols).join(", "));
        }
    }
    if a.interpretations {
        let checks = enumerate_interpretations(&loaded.program, &loaded.query, ap, a.domain_size, a.cap)?;
        let bad: Vec<_> = checks.iter().filter(|c| !c.consistent()).collect();
        let with_model = checks.iter().filter(|c| c.models > 0).count();
        println!("with a model        {with_model}");
        println!("model iff failing   {}", if bad.is_empty() { "yes" } else { "NO" });
        for c in bad {
            let j = PreInterpretation::from_index(a.domain_size, ap.arities(), c.preinterp_index);
            println!("  mismatch: {}", j.render(&ap.symbols).join(", "));
        }
    }
    Ok(if rep.failing > 0 { 0 } else { 1 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Verify { file, certificate } => cmd_verify(file, certificate),
        Command::Enumerate(a) => cmd_enumerate(a),
        Command::DumpAbstract { file, query } => load(&file, query.as_deref()).map(|l| {
            print!("{}", l.abstracted.render());
            0
        }),
    };
    let _ = std::io::stdout().flush();
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("prefail: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
