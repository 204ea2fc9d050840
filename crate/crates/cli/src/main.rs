//! `mce`: answer conditional-probability queries against a knowledge base.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mce_core::kb::parse_statements;
use mce_core::oracle::{exact_posterior, ground_network_with_depth, OracleError};
use mce_core::scoring::{dist_json, ScoreMode};
use mce_core::search::{construct, run_query_traced, trace_lines};
use mce_core::{parse_kb, parse_query, run_query, validate_kb, KnowledgeBase, Policy, Query, RunConfig, SearchError, SearchState64};

#[derive(Parser)]
#[command(name = "mce", version, about = "Anytime inference over probabilistic knowledge bases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report every syntax and table error in a knowledge base.
    Check { kb: PathBuf },
    /// Print the exact posterior of a query.
    Query {
        kb: PathBuf,
        query: String,
        #[arg(long, default_value_t = mce_core::deduce::DEFAULT_DEPTH)]
        depth: usize,
        /// Fail when several dependency statements apply to one variable.
        #[arg(long)]
        strict: bool,
    },
    /// Run the search step by step and emit a JSON-lines trace.
    Anytime {
        kb: PathBuf,
        query: String,
        #[arg(long, value_enum, default_value_t = Mode::Default)]
        score: Mode,
        #[arg(long)]
        max_steps: Option<usize>,
        /// Write the trace here and print only the final record.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = PolicyArg::Default)]
        policy: PolicyArg,
        /// Seed for `--policy random`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Allow margins the marker gate would hold back.
        #[arg(long)]
        no_gate: bool,
        #[arg(long, default_value_t = mce_core::deduce::DEFAULT_DEPTH)]
        depth: usize,
    },
    /// Posterior by enumerating the full ground joint.
    Oracle {
        kb: PathBuf,
        query: String,
        #[arg(long, default_value_t = mce_core::deduce::DEFAULT_DEPTH)]
        depth: usize,
    },
    /// Build the whole network for a query and print it as DOT.
    Graph {
        kb: PathBuf,
        query: String,
        #[arg(long)]
        dot: Option<PathBuf>,
        #[arg(long, default_value_t = mce_core::deduce::DEFAULT_DEPTH)]
        depth: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Default,
    Interval,
    Correct,
}

impl From<Mode> for ScoreMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Default => ScoreMode::Default,
            Mode::Interval => ScoreMode::Interval,
            Mode::Correct => ScoreMode::Correct,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Default,
    ConstructionFirst,
    Random,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

impl From<SearchError> for Failure {
    fn from(e: SearchError) -> Self {
        let code = match e {
            SearchError::InconsistentEvidence => 3,
            SearchError::ResourceCap(_) => 4,
            SearchError::IncompleteTable(_) | SearchError::Script(_) | SearchError::Trace(_) => 1,
            _ => 2,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        let code = match e {
            OracleError::ZeroEvidence => 3,
            OracleError::DepthExceeded(_) | OracleError::TooLarge { .. } => 4,
            OracleError::Unanswerable(_) | OracleError::Cycle(_) => 2,
        };
        Failure::new(code, e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::new(1, format!("{}: {e}", path.display())))
}

fn load(path: &Path, query: &str) -> Result<(KnowledgeBase, Query), Failure> {
    let text = read(path)?;
    let kb = parse_kb(&text).map_err(|e| Failure::new(1, format!("{}:{e}", path.display())))?;
    if let Some(d) = validate_kb(&kb).first() {
        return Err(Failure::new(1, format!("{}:{d}", path.display())));
    }
    let q = parse_query(query, &kb).map_err(|e| Failure::new(1, format!("query: {e}")))?;
    Ok((kb, q))
}

fn check(path: &Path) -> Result<(), Failure> {
    let text = read(path)?;
    let kb = parse_statements(&text).map_err(|e| Failure::new(1, format!("{}:{e}", path.display())))?;
    let diags = validate_kb(&kb);
    for d in &diags {
        eprintln!("{}:{d}", path.display());
    }
    if diags.is_empty() {
        println!("{}: ok, {} statements", path.display(), kb.statements().len());
        Ok(())
    } else {
        Err(Failure::new(1, format!("{} problem(s)", diags.len())))
    }
}

fn dot(s: &SearchState64) -> String {
    let g = s.graph();
    let mut out = String::from("digraph network {\n");
    for (id, node) in g.nodes() {
        let label: Vec<String> = node.members.iter().map(|m| format!("{m}={{{}}}", m.outcomes().join(","))).collect();
        writeln!(out, "  n{id} [label=\"{}\"];", label.join("; ")).unwrap();
    }
    for (p, c) in g.edges() {
        writeln!(out, "  n{p} -> n{c};").unwrap();
    }
    out.push_str("}\n");
    out
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Check { kb } => check(&kb),
        Command::Query { kb, query, depth, strict } => {
            let (kb, q) = load(&kb, &query)?;
            let config = RunConfig { depth, strict, ..RunConfig::default() };
            let r = run_query::<f64>(&kb, &q, &config)?;
            let post = r.posterior.ok_or_else(|| Failure::new(2, "no answer"))?;
            println!("{}", dist_json(&post));
            Ok(())
        }
        Command::Anytime { kb, query, score, max_steps, trace, policy, seed, no_gate, depth } => {
            let (kb, q) = load(&kb, &query)?;
            let policy = match policy {
                PolicyArg::Default => Policy::Default,
                PolicyArg::ConstructionFirst => Policy::ConstructionFirst,
                PolicyArg::Random => Policy::Random(seed),
            };
            let config = RunConfig { policy, max_steps, depth, gate: !no_gate, score: Some(score.into()), ..RunConfig::default() };
            let (records, outcome) = match run_query_traced::<f64>(&kb, &q, &config) {
                Ok(r) => (r.trace, Ok(())),
                Err(f) => (f.trace, Err(Failure::from(f.error))),
            };
            let lines = trace_lines(&records);
            match trace {
                Some(path) => {
                    std::fs::write(&path, &lines).map_err(|e| Failure::new(1, format!("{}: {e}", path.display())))?;
                    if outcome.is_ok() {
                        println!("{}", records.last().expect("final record").to_line());
                    }
                }
                None => print!("{lines}"),
            }
            outcome
        }
        Command::Oracle { kb, query, depth } => {
            let (kb, q) = load(&kb, &query)?;
            let net = ground_network_with_depth(&kb, &q, depth)?;
            let post = exact_posterior::<f64>(&net, &q)?;
            println!("{}", dist_json(&post));
            Ok(())
        }
        Command::Graph { kb, query, dot: path, depth } => {
            let (kb, q) = load(&kb, &query)?;
            let text = dot(&construct::<f64>(&kb, &q, depth)?);
            match path {
                Some(path) => std::fs::write(&path, text).map_err(|e| Failure::new(1, format!("{}: {e}", path.display()))),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
