//! `lexverify`: command-line frontend over the library crates.
//!
//! stdout carries JSON (compact, or indented with `--pretty`); stderr carries
//! diagnostics. Exit codes: 0 success or verdict as expected, 1 usage or
//! validation error, 2 verdict contrary to expectation, 3 solver or
//! completion-backend failure (including timeouts).

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use lexverify_core::batch::{run_batch, Execution};
use lexverify_core::constraint::{validate_bundle, ConstraintBundle};
use lexverify_core::engine::{Engine, EngineError, Verdict};
use lexverify_core::gen::{generate_batch, GenParams};
use lexverify_core::maxsmt::Strategy;
use lexverify_core::smtlib::Status;
use lexverify_core::solver::SolverConfig;
use lexverify_core::trace::render_trace;
use lexverify_gateway::{
    expand_with_port, synthesize_bundle, CompletionParams, CompletionPort, ExpandByIdError, HttpConfig, LlmChoice,
    SynthesisError, SynthesisOptions,
};
use lexverify_service::{load_corpus, ServiceConfig};
use lexverify_text::{default_patterns, extract_articles, ArticleMap, Extraction, Language, PatternSet, DEFAULT_ALPHA};

#[derive(Parser)]
#[command(name = "lexverify", version, about = "Statute compliance checking with SMT solving and weighted MaxSMT correction")]
struct Cli {
    /// Indent JSON output.
    #[arg(long, global = true)]
    pretty: bool,
    /// SMT solver executable (default: z3 on PATH).
    #[arg(long, global = true, env = "LEXV_SOLVER")]
    solver: Option<PathBuf>,
    /// Per-call solver timeout in milliseconds.
    #[arg(long, global = true)]
    timeout_ms: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct LlmArgs {
    /// Completion port: mock, live or replay:<file>.
    #[arg(long, default_value = "mock")]
    llm: LlmChoice,
    #[arg(long, env = "LEXV_LLM_ENDPOINT")]
    llm_endpoint: Option<String>,
    #[arg(long, env = "LEXV_LLM_MODEL")]
    llm_model: Option<String>,
}

impl LlmArgs {
    fn port(&self) -> Result<Arc<dyn CompletionPort>, Failure> {
        let http = match (&self.llm, &self.llm_endpoint, &self.llm_model) {
            (LlmChoice::Live, Some(endpoint), Some(model)) => Some(HttpConfig::new(endpoint, model)),
            (LlmChoice::Live, Some(_), None) => return Err(Failure::usage("the live LLM port needs --llm-model or LEXV_LLM_MODEL")),
            _ => None,
        };
        self.llm.build(http).map_err(Failure::usage)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Expect {
    Sat,
    Unsat,
    Any,
}

#[derive(Clone, Copy, ValueEnum)]
enum SearchMode {
    Hybrid,
    Bm25,
    Vector,
}

#[derive(Subcommand)]
enum Command {
    /// Check a bundle against the schema rules without running the solver.
    Validate { bundle: PathBuf },
    /// Are the HARD constraints consistent? Expected: sat.
    CheckLaw {
        bundle: PathBuf,
        #[arg(long, value_enum, default_value = "sat")]
        expect: Expect,
    },
    /// Do the facts force the penalty? Expected: unsat (the case is illegal).
    CheckCase {
        bundle: PathBuf,
        #[arg(long, value_enum, default_value = "unsat")]
        expect: Expect,
    },
    /// Enumerate the statutory terms the case violates.
    IllegalTerms { bundle: PathBuf },
    /// Minimum-weight fact revision that restores legality.
    Optimize {
        bundle: PathBuf,
        #[arg(long, default_value = "linear")]
        strategy: Strategy,
        /// Weight multiplier for a constraint id or group, as key=value; repeatable.
        #[arg(long = "weight-override", value_parser = parse_override, num_args = 1..)]
        weight_override: Vec<(String, u64)>,
    },
    /// Split statute text into articles and clauses.
    ExtractArticles {
        text: PathBuf,
        #[arg(long, default_value = "en")]
        lang: Language,
        /// JSON pattern set replacing the built-in one for the language.
        #[arg(long)]
        patterns: Option<PathBuf>,
    },
    /// Rank corpus articles for a query.
    Search {
        query: String,
        #[arg(long)]
        corpus: PathBuf,
        /// Weight of vector similarity against BM25.
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(short, long, default_value_t = 10)]
        k: usize,
        #[arg(long, value_enum, default_value = "hybrid")]
        mode: SearchMode,
    },
    /// Gather related articles for one corpus article.
    Expand {
        article_id: String,
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        llm: LlmArgs,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(short, long, default_value_t = 10)]
        k: usize,
    },
    /// Generate a constraint bundle from a case narrative and its articles.
    Synthesize {
        case_text: PathBuf,
        /// Article map JSON, or the output of extract-articles.
        #[arg(long)]
        articles: PathBuf,
        #[command(flatten)]
        llm: LlmArgs,
        /// Show the accepted bundle on stderr and ask before emitting it.
        #[arg(long)]
        review: bool,
        #[arg(long, default_value_t = lexverify_gateway::synthesis::DEFAULT_MAX_ROUNDS)]
        max_rounds: usize,
        /// Also write the accepted bundle here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "store")]
        store: PathBuf,
        #[arg(long, env = "LEXV_BIND", default_value = "127.0.0.1:8080")]
        bind: std::net::SocketAddr,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Allowed CORS origin; repeatable. Default: any origin.
        #[arg(long = "cors-origin")]
        cors_origins: Vec<String>,
        /// Directory of static files served at / (the built web UI).
        #[arg(long)]
        ui_dir: Option<PathBuf>,
        #[command(flatten)]
        llm: LlmArgs,
    },
    /// Synthetic bundles with realistic case sizes.
    GenCases {
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Write one file per case instead of a JSON array on stdout.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Check and correct many bundles (files, or generated with --gen).
    Batch {
        bundles: Vec<PathBuf>,
        #[arg(long)]
        gen: Option<usize>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = "core")]
        strategy: Strategy,
        /// Run cases one after another instead of in parallel.
        #[arg(long)]
        sequential: bool,
    },
}

fn parse_override(s: &str) -> Result<(String, u64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v: u64 = v.parse().map_err(|_| format!("weight multiplier `{v}` is not a positive integer"))?;
    if k.is_empty() || v == 0 {
        return Err(format!("bad override `{s}`"));
    }
    Ok((k.to_string(), v))
}

/// A command that did not succeed: its exit code and a JSON body for stdout.
struct Failure {
    code: u8,
    body: Value,
}

impl Failure {
    fn new(code: u8, error: &str, message: impl Into<String>) -> Self {
        Failure { code, body: json!({ "error": error, "message": message.into() }) }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self::new(1, "usage", message)
    }

    fn contrary(body: Value) -> Self {
        Failure { code: 2, body }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let message = e.to_string();
        match e {
            EngineError::Invalid(errors) => Failure {
                code: 1,
                body: json!({ "error": "invalid_bundle", "message": message, "errors": errors.iter().map(ToString::to_string).collect::<Vec<_>>() }),
            },
            EngineError::Emit(_) => Failure::new(1, "unsupported_bundle", message),
            EngineError::NotIllegal => Failure::new(2, "not_illegal", message),
            EngineError::NoFeasibleCompliance { core } => {
                Failure { code: 2, body: json!({ "error": "no_feasible_compliance", "message": message, "core": core }) }
            }
            EngineError::SolverTimeout { timeout_ms, lower_bound, upper_bound } => Failure {
                code: 3,
                body: json!({ "error": "solver_timeout", "message": message, "timeout_ms": timeout_ms, "lower_bound": lower_bound, "upper_bound": upper_bound }),
            },
            EngineError::Solver(_) | EngineError::Inconclusive { .. } | EngineError::CoresUnsupported => {
                Failure::new(3, "solver_failure", message)
            }
        }
    }
}

/// Successful output. `Ordered` keeps struct field order, which a `Value` would sort.
enum Reply {
    Value(Value),
    Ordered { compact: String, pretty: String },
}

impl From<Value> for Reply {
    fn from(v: Value) -> Self {
        Reply::Value(v)
    }
}

fn ordered<T: Serialize>(v: &T) -> Reply {
    Reply::Ordered {
        compact: serde_json::to_string(v).expect("output serializes"),
        pretty: serde_json::to_string_pretty(v).expect("output serializes"),
    }
}

type Outcome = Result<Value, Failure>;

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("output serializes")
}

fn load_bundle(path: &Path) -> Result<ConstraintBundle, Failure> {
    ConstraintBundle::from_path(path).map_err(|e| Failure::new(1, "unreadable_bundle", e.to_string()))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::new(1, "unreadable_input", format!("{}: {e}", path.display())))
}

fn engine(cli: &Cli) -> Result<Engine, Failure> {
    let mut cfg = SolverConfig::locate(cli.solver.as_deref())
        .ok_or_else(|| Failure::new(3, "no_solver", "no SMT solver found; pass --solver or set LEXV_SOLVER"))?;
    if let Some(ms) = cli.timeout_ms {
        cfg = cfg.with_timeout(ms);
    }
    Engine::connect(cfg).map_err(|e| Failure::new(3, "solver_failure", e.to_string()))
}

fn verdict_outcome(verdict: Verdict, expect: Expect) -> Outcome {
    let body = to_json(&verdict);
    match (expect, verdict.status) {
        (Expect::Any, _) | (Expect::Sat, Status::Sat) | (Expect::Unsat, Status::Unsat) => Ok(body),
        (_, Status::Unknown) => Err(Failure { code: 3, body }),
        _ => Err(Failure::contrary(body)),
    }
}

fn load_articles(path: &Path) -> Result<ArticleMap, Failure> {
    let text = read_text(path)?;
    let bad = |e: serde_json::Error| Failure::new(1, "unreadable_articles", format!("{}: {e}", path.display()));
    let value: Value = serde_json::from_str(&text).map_err(bad)?;
    if value.get("articles").is_some() && value.get("diagnostics").is_some() {
        Ok(serde_json::from_value::<Extraction>(value).map_err(bad)?.articles)
    } else {
        serde_json::from_value(value).map_err(bad)
    }
}

fn confirm(synthesis: &lexverify_gateway::Synthesis) -> bool {
    let mut err = std::io::stderr().lock();
    for a in &synthesis.attempts {
        let _ = writeln!(err, "attempt {}: {:?}{}", a.attempt, a.outcome, a.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default());
    }
    let _ = writeln!(err, "{}", synthesis.bundle.to_json_pretty());
    let _ = write!(err, "Accept this bundle? [y/N] ");
    let _ = err.flush();
    let mut line = String::new();
    let _ = BufReader::new(std::io::stdin()).read_line(&mut line);
    matches!(line.trim(), "y" | "Y" | "yes")
}

fn run(cli: &Cli) -> Result<Reply, Failure> {
    if let Command::ExtractArticles { text, lang, patterns } = &cli.command {
        let patterns = match patterns {
            Some(p) => PatternSet::from_json_str(&read_text(p)?).map_err(|e| Failure::usage(e.to_string()))?,
            None => default_patterns(*lang),
        };
        return Ok(ordered(&extract_articles(&read_text(text)?, &patterns)));
    }
    run_value(cli).map(Reply::from)
}

fn run_value(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Validate { bundle } => {
            let b = load_bundle(bundle)?;
            let errors = validate_bundle(&b);
            let body = json!({
                "case_id": b.case_id,
                "valid": errors.is_empty(),
                "errors": errors.iter().map(ToString::to_string).collect::<Vec<_>>(),
            });
            if errors.is_empty() {
                Ok(body)
            } else {
                Err(Failure { code: 1, body })
            }
        }
        Command::CheckLaw { bundle, expect } => {
            let b = load_bundle(bundle)?;
            verdict_outcome(engine(cli)?.check_law_consistency(&b)?, *expect)
        }
        Command::CheckCase { bundle, expect } => {
            let b = load_bundle(bundle)?;
            verdict_outcome(engine(cli)?.check_case_illegality(&b)?, *expect)
        }
        Command::IllegalTerms { bundle } => {
            let b = load_bundle(bundle)?;
            Ok(to_json(&engine(cli)?.enumerate_illegal_terms(&b)?))
        }
        Command::Optimize { bundle, strategy, weight_override } => {
            let b = load_bundle(bundle)?;
            let overrides: BTreeMap<String, u64> = weight_override.iter().cloned().collect();
            let result = engine(cli)?.minimize_violation(&b, *strategy, &overrides)?;
            let mut body = to_json(&result);
            body["trace"] = json!(render_trace(&result, &b));
            Ok(body)
        }
        Command::ExtractArticles { .. } => unreachable!("handled in run"),
        Command::Search { query, corpus, alpha, k, mode } => {
            if !(0.0..=1.0).contains(alpha) {
                return Err(Failure::usage(format!("--alpha must lie in [0, 1], got {alpha}")));
            }
            let index = load_corpus(corpus).map_err(|e| Failure::usage(e.to_string()))?;
            let hits = match mode {
                SearchMode::Hybrid => index.hybrid_search(query, *k, *alpha),
                SearchMode::Bm25 => index.bm25_search(query, *k),
                SearchMode::Vector => index.vector_search(query, *k),
            };
            Ok(json!({ "query": query, "alpha": alpha, "hits": hits }))
        }
        Command::Expand { article_id, corpus, llm, alpha, k } => {
            if !(0.0..=1.0).contains(alpha) {
                return Err(Failure::usage(format!("--alpha must lie in [0, 1], got {alpha}")));
            }
            let index = load_corpus(corpus).map_err(|e| Failure::usage(e.to_string()))?;
            let expansion = expand_with_port(article_id, &index, llm.port()?, &CompletionParams::default(), *alpha, *k)
                .map_err(|e| match e {
                    ExpandByIdError::UnknownDoc(_) => Failure::usage(e.to_string()),
                    ExpandByIdError::Expand(_) => Failure::new(3, "port_failure", e.to_string()),
                })?;
            Ok(to_json(&expansion))
        }
        Command::Synthesize { case_text, articles, llm, review, max_rounds, out } => {
            let text = read_text(case_text)?;
            let articles = load_articles(articles)?;
            let port = llm.port()?;
            let options = SynthesisOptions { max_repair_rounds: *max_rounds, ..Default::default() };
            let synthesis = match synthesize_bundle(&text, &articles, port.as_ref(), &engine(cli)?, &options) {
                Ok(s) => s,
                Err(SynthesisError::NoRounds) => return Err(Failure::usage("--max-rounds must be at least 1")),
                Err(e @ SynthesisError::SynthesisExhausted { .. }) => {
                    let message = e.to_string();
                    let SynthesisError::SynthesisExhausted { attempts } = e else { unreachable!() };
                    return Err(Failure::contrary(json!({ "error": "synthesis_exhausted", "message": message, "attempts": attempts })));
                }
            };
            if *review && !confirm(&synthesis) {
                return Err(Failure::contrary(json!({ "error": "rejected", "message": "bundle rejected at review" })));
            }
            if let Some(path) = out {
                std::fs::write(path, lexverify_store::bundle_bytes(&synthesis.bundle))
                    .map_err(|e| Failure::new(1, "unwritable_output", format!("{}: {e}", path.display())))?;
            }
            Ok(to_json(&synthesis))
        }
        Command::Serve { store, bind, corpus, cors_origins, ui_dir, llm } => {
            let config = ServiceConfig {
                bind: *bind,
                store_dir: store.clone(),
                solver: cli.solver.clone(),
                solver_timeout_ms: cli.timeout_ms,
                corpus: corpus.clone(),
                cors_origins: cors_origins.clone(),
                ui_dir: ui_dir.clone(),
            };
            let state = config.build_state(llm.port()?).map_err(|e| Failure::new(1, "startup", e.to_string()))?;
            tracing_subscriber::fmt()
                .with_env_filter(tracing_subscriber::EnvFilter::try_from_env("LEXV_LOG").unwrap_or_else(|_| "info".into()))
                .with_writer(std::io::stderr)
                .init();
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::new(1, "startup", e.to_string()))?;
            runtime.block_on(lexverify_service::serve(config, state)).map_err(|e| Failure::new(1, "server", e.to_string()))?;
            Ok(json!({ "status": "stopped" }))
        }
        Command::GenCases { n, seed, out_dir } => {
            let bundles = generate_batch(*n, *seed, &GenParams::default());
            let Some(dir) = out_dir else {
                return Ok(to_json(&bundles));
            };
            std::fs::create_dir_all(dir).map_err(|e| Failure::new(1, "unwritable_output", e.to_string()))?;
            let mut written = Vec::new();
            for b in &bundles {
                let path = dir.join(format!("{}.json", b.case_id));
                std::fs::write(&path, lexverify_store::bundle_bytes(b))
                    .map_err(|e| Failure::new(1, "unwritable_output", format!("{}: {e}", path.display())))?;
                written.push(path.display().to_string());
            }
            Ok(json!({ "written": written }))
        }
        Command::Batch { bundles, gen, seed, strategy, sequential } => {
            let mut all = bundles.iter().map(|p| load_bundle(p)).collect::<Result<Vec<_>, _>>()?;
            if let Some(n) = gen {
                all.extend(generate_batch(*n, *seed, &GenParams::default()));
            }
            let execution = if *sequential { Execution::Sequential } else { Execution::Parallel };
            let report = run_batch(&engine(cli)?, &all, *strategy, execution);
            let body = to_json(&report);
            if report.failures().next().is_some() {
                Err(Failure { code: 3, body })
            } else if report.outcomes.iter().any(|o| o.case != Some(Status::Unsat)) {
                Err(Failure::contrary(body))
            } else {
                Ok(body)
            }
        }
    }
}

fn print(value: &Value, pretty: bool) {
    let text = if pretty { serde_json::to_string_pretty(value) } else { serde_json::to_string(value) };
    println!("{}", text.expect("JSON value serializes"));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(Reply::Value(body)) => {
            print(&body, cli.pretty);
            ExitCode::SUCCESS
        }
        Ok(Reply::Ordered { compact, pretty }) => {
            println!("{}", if cli.pretty { pretty } else { compact });
            ExitCode::SUCCESS
        }
        Err(Failure { code, body }) => {
            if let Some(message) = body.get("message").and_then(Value::as_str) {
                eprintln!("lexverify: {message}");
            }
            print(&body, cli.pretty);
            ExitCode::from(code)
        }
    }
}
