//! `lexjoin`: analyze join queries, build direct-access indexes and query
//! them, produce oracle output and generate benchmark instances.
//!
//! Exit codes: 0 success, 2 input error, 3 out of bounds or not an answer,
//! 4 internal failure.

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lexjoin::access::{AccessError, AccessIndex};
use lexjoin::decomposition::{fraction_string, Decomposition, Rational};
use lexjoin::oracle::{materialize_sorted_capped, OracleError, DEFAULT_CAP};
use lexjoin::query::{parse_query, JoinQuery, VariableOrder};
use lexjoin::storage::{Code, Database};
use lexjoin_lab::clique::WeightedCliqueInstance;
use lexjoin_lab::generate;
use lexjoin_lab::reduction::{default_rho, find_zero_clique_via_reduction};
use lexjoin_lab::setfamily::{BruteForceBackend, EngineBackend, IntersectionBackend};
use lexjoin_lab::LabError;
use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;

use output::{print_json, Format, TupleWriter};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Bounds(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Bounds(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

impl From<AccessError> for CliError {
    fn from(e: AccessError) -> Self {
        match e {
            AccessError::OutOfBounds { .. } => CliError::Bounds(e.to_string()),
            AccessError::InvalidRange { .. } | AccessError::SampleTooLarge { .. } => {
                CliError::Bounds(format!("out of bounds: {e}"))
            }
            AccessError::NotAnAnswer => CliError::Bounds("not an answer".into()),
            AccessError::Arity { .. }
            | AccessError::InvalidQuantile(_)
            | AccessError::EmptyResult
            | AccessError::Storage(_)
            | AccessError::Join(_) => CliError::Input(e.to_string()),
        }
    }
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        match e {
            LabError::Access(a) => a.into(),
            LabError::Output { .. } => CliError::Internal(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "lexjoin", version, about = "Lexicographic direct access to join query answers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report acyclicity, disruptive trios, decomposition bags and widths.
    Analyze {
        query: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Build a direct-access index and save it.
    Build {
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the answer at a 0-based position.
    Access {
        #[command(flatten)]
        index: IndexArgs,
        #[arg(short = 'j')]
        position: BigUint,
    },
    /// Print the number of answers.
    Count {
        #[command(flatten)]
        index: IndexArgs,
    },
    /// Print the position of an answer given as comma-separated values in
    /// head order.
    Rank {
        #[command(flatten)]
        index: IndexArgs,
        #[arg(short = 't', allow_hyphen_values = true)]
        tuple: String,
    },
    /// Print answers at positions `from..to`.
    Enum {
        #[command(flatten)]
        index: IndexArgs,
        #[arg(long, default_value_t = BigUint::from(0u32))]
        from: BigUint,
        /// Defaults to the answer count.
        #[arg(long)]
        to: Option<BigUint>,
    },
    /// Print `n` distinct uniformly sampled answers in answer order.
    Sample {
        #[command(flatten)]
        index: IndexArgs,
        #[arg(short = 'n')]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the answer at position floor(q * (count - 1)).
    Quantile {
        #[command(flatten)]
        index: IndexArgs,
        /// A fraction such as `1/2` or a decimal such as `0.25`.
        #[arg(short = 'q')]
        q: String,
    },
    /// Check whether a tuple is an answer.
    Test {
        #[command(flatten)]
        index: IndexArgs,
        #[arg(short = 't', allow_hyphen_values = true)]
        tuple: String,
    },
    /// Materialize all answers by brute force, sorted, as CSV.
    Oracle {
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        db: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
    },
    /// Generate benchmark instances.
    Gen {
        #[command(subcommand)]
        family: Family,
    },
    /// Search a weighted multipartite graph for a zero clique through
    /// set-intersection instances.
    Reduce {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum, default_value_t = Backend::Engine)]
        backend: Backend,
        /// Interval exponent as a fraction; defaults to 1/(2k).
        #[arg(long)]
        rho: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct IndexArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Brute,
    Engine,
}

#[derive(Subcommand)]
enum Family {
    /// Star query with the center variable last.
    Star {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        rows: usize,
        #[arg(long, default_value_t = 100)]
        domain: i64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Loomis-Whitney query.
    Lw {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        rows: usize,
        #[arg(long, default_value_t = 20)]
        domain: i64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Set families encoded for the star query.
    Setdisj {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 20)]
        sets: usize,
        #[arg(long, default_value_t = 50)]
        universe: usize,
        #[arg(long, default_value_t = 0.2)]
        density: f64,
        #[arg(long, default_value_t = 20)]
        queries: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Weighted complete (k+1)-partite graph.
    Zeroclique {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 12)]
        part_size: usize,
        #[arg(long, default_value_t = 1000)]
        bound: i64,
        #[arg(long)]
        planted: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))
}

fn load_query(path: &Path) -> Result<(JoinQuery, VariableOrder), CliError> {
    parse_query(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_index(path: &Path) -> Result<AccessIndex, CliError> {
    AccessIndex::load(path).map_err(input)
}

fn parse_tuple(ix: &AccessIndex, raw: &str) -> Result<Option<Vec<Code>>, CliError> {
    let fields: Vec<&str> = raw.split(',').collect();
    Ok(ix.parse_values(&fields)?)
}

fn parse_fraction(raw: &str) -> Result<Rational, CliError> {
    let raw = raw.trim();
    let bad = || input(format!("invalid quantile `{raw}`"));
    if let Some((whole, frac)) = raw.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let digits: num_bigint::BigInt = format!("{whole}{frac}").parse().map_err(|_| bad())?;
        let scale = num_bigint::BigInt::from(10u32).pow(frac.len() as u32);
        Ok(Rational::new(digits, scale))
    } else {
        raw.parse::<Rational>().map_err(|_| bad())
    }
}

fn analyze(path: &Path, format: Format) -> Result<(), CliError> {
    let (q, l) = load_query(path)?;
    let d = Decomposition::compute(&q, &l);
    let name = |v: usize| q.var_name(v).to_string();
    let names = |vs: &mut dyn Iterator<Item = usize>| vs.map(name).collect::<Vec<_>>();
    let report = json!({
        "schema": 1,
        "query": q.to_text(&l).trim_end(),
        "order": names(&mut l.as_slice().iter().copied()),
        "acyclic": q.hypergraph().is_acyclic(),
        "self_join_free": q.is_self_join_free(),
        "disruptive_trios": q.disruptive_trios(&l).iter().map(|&(a, b, c)| vec![name(a), name(b), name(c)]).collect::<Vec<_>>(),
        "bags": (0..d.len()).map(|i| json!({
            "variable": name(l.var(i)),
            "bag": names(&mut d.bags[i].iter().copied()),
            "parent": d.parent[i],
            "rho_star": fraction_string(&d.covers[i].cover.total),
        })).collect::<Vec<_>>(),
        "iota": fraction_string(&d.iota),
        "witness_bag": d.witness_bag,
    });
    match format {
        Format::Json | Format::Csv => print_json(&report),
        Format::Text => {
            println!("query: {}", q.to_text(&l).trim_end().replace('\n', " "));
            println!("acyclic: {}", report["acyclic"]);
            println!("self-join-free: {}", report["self_join_free"]);
            println!("disruptive trios: {}", report["disruptive_trios"]);
            for (i, bag) in report["bags"].as_array().unwrap().iter().enumerate() {
                println!("bag {i} ({}): {} parent {} rho* {}", bag["variable"], bag["bag"], bag["parent"], bag["rho_star"]);
            }
            println!("iota: {} (bag {})", d.iota, d.witness_bag);
        }
    }
    Ok(())
}

fn build(query: &Path, db: &Path, out: &Path) -> Result<(), CliError> {
    let (q, l) = load_query(query)?;
    let db = Database::load(db).map_err(input)?;
    let (ix, stats) = AccessIndex::build_with_stats(&q, &l, &db)?;
    ix.save(out).map_err(|e| CliError::Internal(e.to_string()))?;
    let d = Decomposition::compute(&q, &l);
    print_json(&json!({
        "schema": 1,
        "count": ix.count().to_string(),
        "database_size": db.size(),
        "iota": fraction_string(&d.iota),
        "bag_joins": stats.bag_joins,
        "multi_atom_joins": stats.multi_atom_joins,
        "materialized_rows": stats.materialized_rows,
        "reduced_rows": stats.reduced_rows,
        "build_ms": stats.elapsed_ms,
        "index": out.display().to_string(),
    }));
    Ok(())
}

fn oracle(query: &Path, db: &Path, cap: usize) -> Result<(), CliError> {
    let (q, l) = load_query(query)?;
    let db = Database::load(db).map_err(input)?;
    let types = db.check_query(&q).map_err(input)?;
    let result = materialize_sorted_capped(&q, &l, &db, cap).map_err(|e| match e {
        OracleError::CapExceeded { .. } => CliError::Input(e.to_string()),
        OracleError::Join(j) => input(j),
    })?;
    let mut w = TupleWriter::new(Format::Csv);
    for t in &result.tuples {
        w.write(&db.decode_tuple(&types, t));
    }
    w.finish();
    Ok(())
}

fn print_tuples(ix: &AccessIndex, format: Format, tuples: impl IntoIterator<Item = Vec<Code>>) {
    let mut w = TupleWriter::new(format).with_header(ix.query().variables());
    for t in tuples {
        w.write(&ix.decode(&t));
    }
    w.finish();
}

fn print_scalar(format: Format, key: &str, value: serde_json::Value) {
    match format {
        Format::Json => print_json(&json!({ "schema": 1, key: value })),
        Format::Csv | Format::Text => match value {
            serde_json::Value::String(s) => println!("{s}"),
            other => println!("{other}"),
        },
    }
}

fn generate(family: Family) -> Result<(), CliError> {
    let files = match family {
        Family::Star { out, k, rows, domain, seed } => generate::star(&out, k, rows, domain, seed)?,
        Family::Lw { out, k, rows, domain, seed } => generate::lw(&out, k, rows, domain, seed)?,
        Family::Setdisj { out, k, sets, universe, density, queries, seed } => {
            generate::set_disjointness(&out, k, sets, universe, density, queries, seed)?
        }
        Family::Zeroclique { out, k, part_size, bound, planted, seed } => {
            generate::zero_clique(&out, k, part_size, bound, planted, seed)?.0
        }
    };
    print_json(&json!({
        "schema": 1,
        "files": files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>(),
    }));
    Ok(())
}

fn reduce(graph: &Path, backend: Backend, rho: Option<String>, seed: u64) -> Result<(), CliError> {
    let g = WeightedCliqueInstance::parse(&read(graph)?)?;
    let k = g.num_parts() - 1;
    let rho = match rho {
        Some(r) => parse_fraction(&r)?,
        None => default_rho(k),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let backend: &dyn IntersectionBackend = match backend {
        Backend::Brute => &BruteForceBackend,
        Backend::Engine => &EngineBackend,
    };
    let report = find_zero_clique_via_reduction(&g, &rho, &mut rng, backend)?;
    print_json(&json!({
        "schema": 1,
        "backend": backend.name(),
        "clique": report.clique,
        "p": report.p,
        "intervals": report.intervals,
        "cap": report.cap,
        "instances": report.instances,
        "queries": report.queries,
    }));
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze { query, format } => analyze(&query, format),
        Command::Build { query, db, out } => build(&query, &db, &out),
        Command::Access { index, position } => {
            let ix = load_index(&index.index)?;
            let t = ix.access(&position)?;
            print_tuples(&ix, index.format, [t]);
            Ok(())
        }
        Command::Count { index } => {
            let ix = load_index(&index.index)?;
            print_scalar(index.format, "count", json!(ix.count().to_string()));
            Ok(())
        }
        Command::Rank { index, tuple } => {
            let ix = load_index(&index.index)?;
            let codes = parse_tuple(&ix, &tuple)?.ok_or(AccessError::NotAnAnswer)?;
            print_scalar(index.format, "rank", json!(ix.rank(&codes)?.to_string()));
            Ok(())
        }
        Command::Enum { index, from, to } => {
            let ix = load_index(&index.index)?;
            let to = to.unwrap_or_else(|| ix.count().clone());
            let answers = ix.enumerate(&from, &to)?;
            print_tuples(&ix, index.format, answers);
            Ok(())
        }
        Command::Sample { index, n, seed } => {
            let ix = load_index(&index.index)?;
            let answers = ix.sample_without_replacement(n, seed)?;
            print_tuples(&ix, index.format, answers);
            Ok(())
        }
        Command::Quantile { index, q } => {
            let ix = load_index(&index.index)?;
            let t = ix.quantile(&parse_fraction(&q)?)?;
            print_tuples(&ix, index.format, [t]);
            Ok(())
        }
        Command::Test { index, tuple } => {
            let ix = load_index(&index.index)?;
            let member = match parse_tuple(&ix, &tuple)? {
                Some(codes) => ix.test(&codes)?,
                None => false,
            };
            print_scalar(index.format, "answer", json!(member));
            Ok(())
        }
        Command::Oracle { query, db, cap } => oracle(&query, &db, cap),
        Command::Gen { family } => generate(family),
        Command::Reduce { graph, backend, rho, seed } => reduce(&graph, backend, rho, seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LEXJOIN_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::debug!("command failed: {e:?}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
