//! Command-line front end. JSON goes to stdout, logs and summaries to
//! stderr. Exit codes: 0 success, 1 evaluation failure, 2 usage or input
//! error.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use factcheck_core::backend::TokenPricing;
use factcheck_core::checker::CheckerMetrics;
use factcheck_core::llm_eval::{LlmReport, SubsetStatus, UncertaintyLexicon};
use factcheck_core::response::{evaluate_state, EvaluateError};
use factcheck_core::{
    Claim, Clock, FactState, PipelineConfig, Registry, ResponseReport, Stage, StateValue, TextGenerationBackend,
    ZeroClock,
};
use serde::Serialize;

use crate::checker_eval::{ingest_verdicts, load_factbench, score_submission};
use crate::clock::SystemClock;
use crate::config::{load_pipeline_config, load_pipeline_config_file};
use crate::corpus::load_corpus;
use crate::llm_backend::{load_mock_backend, pricing_from_env, CachedBackend, ChatCompletionsBackend};
use crate::llm_eval::{ingest_responses, load_manifest, FreeFormChecker, LlmEvaluator};
use crate::registry::{SolverSet, OFFLINE_CONFIG};
use crate::service::{self, PartsOptions, ServiceConfig};
use crate::web::{EvidenceCache, SerperProvider, WebSearch};

#[derive(Parser, Debug)]
#[command(
    name = "factcheck",
    version,
    about = "Fact-check text, score LLM answers and score fact-checkers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fact-check a document and print its report.
    Check(CheckArgs),
    /// Score LLM responses against a question manifest.
    LlmEval(LlmEvalArgs),
    /// Score fact-checker verdicts against a gold set.
    CheckerEval(CheckerEvalArgs),
    /// List the registered solvers.
    Solvers(SolverArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// Offline corpus (JSON lines of id, title, text).
    #[arg(long, env = "OFC_CORPUS")]
    pub corpus: Option<PathBuf>,
    /// Directory of the search and LLM record/replay caches.
    #[arg(long, env = "OFC_CACHE_DIR", default_value = ".factcheck-cache")]
    pub cache_dir: PathBuf,
    /// JSON script of canned outputs standing in for the LLM backend.
    #[arg(long)]
    pub mock_llm: Option<PathBuf>,
    /// Serve remote calls from the caches only.
    #[arg(long)]
    pub replay_only: bool,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Also write the JSON output to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print a human-readable table instead of JSON.
    #[arg(long)]
    pub pretty: bool,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[arg(long, conflicts_with = "file")]
    pub text: Option<String>,
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Pipeline config; defaults to the offline pipeline.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Start at this stage, reading a claims array or a state from stdin.
    #[arg(long, value_parser = parse_stage)]
    pub start_step: Option<Stage>,
    /// Record zero wall time, for reproducible output.
    #[arg(long)]
    pub no_timing: bool,
    /// Worker threads for solvers that fan out over claims.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub solvers: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct LlmEvalArgs {
    #[arg(long)]
    pub model: String,
    /// CSV with header question_id,response.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Pipeline for free-form answers; defaults to the offline pipeline.
    #[arg(long)]
    pub checker_config: Option<PathBuf>,
    /// Canned judge outputs; otherwise the LLM backend judges.
    #[arg(long)]
    pub judge_mock: Option<PathBuf>,
    /// JSON `{"phrases": [...]}` replacing the refusal lexicon.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub no_timing: bool,
    #[command(flatten)]
    pub solvers: SolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct CheckerEvalArgs {
    /// CSV with header claim_id,verdict[,time_s,cost_usd].
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, env = "OFC_DATA_DIR", default_value = "data")]
    pub data_dir: PathBuf,
    #[arg(long, env = "OFC_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    #[arg(long, default_value_t = ServiceConfig::DEFAULT_WORKERS)]
    pub workers: usize,
    #[arg(long, default_value_t = 2 * 60 * 60)]
    pub job_timeout_secs: u64,
    /// Allowed dashboard origin; repeatable. Any origin when omitted.
    #[arg(long)]
    pub cors_origin: Vec<String>,
    /// Named config used for free-form answers in llm-eval jobs.
    #[arg(long)]
    pub checker_config: Option<String>,
    #[arg(long)]
    pub replay_only: bool,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    Stage::parse(s).ok_or_else(|| format!("unknown stage `{s}`; expected claim_processor, retriever or verifier"))
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn failure(e: impl std::fmt::Display) -> CliError {
    CliError::Failure(e.to_string())
}

/// Parses `args` and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            let (CliError::Usage(m) | CliError::Failure(m)) = &e;
            eprintln!("error: {m}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Check(a) => check(a),
        Command::LlmEval(a) => llm_eval(a),
        Command::CheckerEval(a) => checker_eval(a),
        Command::Solvers(a) => {
            let (registry, _) = build_registry(&a)?;
            emit(
                &registry.list(),
                &OutputArgs {
                    out: None,
                    pretty: false,
                },
                String::new,
            )
        }
        Command::Serve(a) => serve(a),
    }
}

fn llm_backend(args: &SolverArgs) -> Result<Option<Arc<dyn TextGenerationBackend>>, CliError> {
    if let Some(path) = &args.mock_llm {
        return Ok(Some(Arc::new(load_mock_backend(path).map_err(usage)?)));
    }
    let dir = args.cache_dir.join("llm");
    Ok(
        ChatCompletionsBackend::from_env().map(|b| -> Arc<dyn TextGenerationBackend> {
            if args.replay_only {
                Arc::new(CachedBackend::replay(b.model.clone(), dir))
            } else {
                Arc::new(CachedBackend::record(Arc::new(b), dir))
            }
        }),
    )
}

fn build_registry(args: &SolverArgs) -> Result<(Registry, Option<Arc<dyn TextGenerationBackend>>), CliError> {
    let corpus = match &args.corpus {
        Some(p) => load_corpus(p).map_err(usage)?,
        None => Vec::new(),
    };
    let web = WebSearch::new(
        Arc::new(SerperProvider::default()),
        EvidenceCache::new(args.cache_dir.join("search")),
    )
    .with_env_key()
    .replay_only(args.replay_only);
    let mut set = SolverSet::offline(corpus).with_web(Arc::new(web));
    let backend = llm_backend(args)?;
    if let Some(b) = &backend {
        set = set.with_llm(b.clone(), pricing_from_env());
    }
    Ok((set.build(), backend))
}

fn load_config(path: Option<&Path>, registry: &Registry) -> Result<PipelineConfig, CliError> {
    match path {
        Some(p) => load_pipeline_config_file(p, registry).map_err(usage),
        None => load_pipeline_config(OFFLINE_CONFIG, registry).map_err(usage),
    }
}

/// Writes `value` as JSON to stdout (or the table, with `--pretty`) and to
/// `--out` when given.
fn emit<T: Serialize>(value: &T, output: &OutputArgs, table: impl FnOnce() -> String) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(failure)?;
    bytes.push(b'\n');
    if let Some(path) = &output.out {
        std::fs::write(path, &bytes).map_err(|e| failure(format!("cannot write {}: {e}", path.display())))?;
    }
    let mut stdout = std::io::stdout().lock();
    let written = if output.pretty {
        stdout.write_all(table().as_bytes())
    } else {
        stdout.write_all(&bytes)
    };
    written.and_then(|_| stdout.flush()).map_err(failure)
}

fn set_jobs(jobs: Option<usize>) {
    if let Some(n) = jobs {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn read_stdin() -> Result<String, CliError> {
    let mut s = String::new();
    std::io::stdin().read_to_string(&mut s).map_err(usage)?;
    Ok(s)
}

/// State for a run starting at `index`: stdin holds either a claims array,
/// stored under that step's input name, or a full state.
fn starting_state(
    stdin: &str,
    config: &PipelineConfig,
    index: usize,
    document: Option<String>,
) -> Result<FactState, CliError> {
    let input = &config.solvers[index].input_name;
    let value: serde_json::Value = serde_json::from_str(stdin).map_err(|e| usage(format!("stdin is not JSON: {e}")))?;
    let mut state = if value.is_array() {
        let claims: Vec<Claim> =
            serde_json::from_value(value).map_err(|e| usage(format!("stdin is not a claims array: {e}")))?;
        let mut s = FactState::new();
        s.insert(input.clone(), StateValue::Claims(claims));
        s
    } else {
        serde_json::from_value(value).map_err(|e| usage(format!("stdin is not a state: {e}")))?
    };
    if let Some(doc) = document {
        if !state.entries.values().any(|v| matches!(v, StateValue::Document(_))) {
            state.insert("document", StateValue::Document(doc));
        }
    }
    Ok(state)
}

fn check(a: CheckArgs) -> Result<(), CliError> {
    set_jobs(a.jobs);
    let document = match (&a.text, &a.file) {
        (Some(t), None) => Some(t.clone()),
        (None, Some(p)) => {
            Some(std::fs::read_to_string(p).map_err(|e| usage(format!("cannot read {}: {e}", p.display())))?)
        }
        (None, None) if a.start_step.is_some() => None,
        _ => return Err(usage("exactly one of --text or --file is required")),
    };
    let (registry, _) = build_registry(&a.solvers)?;
    let config = load_config(a.config.as_deref(), &registry)?;
    let clock: Box<dyn Clock> = if a.no_timing {
        Box::new(ZeroClock)
    } else {
        Box::new(SystemClock::new())
    };
    let (state, config) = match a.start_step {
        None => {
            let doc = document.unwrap_or_default();
            let input = config.solvers[config.start_index].input_name.clone();
            let mut s = FactState::new();
            s.insert(input, StateValue::Document(doc));
            (s, config)
        }
        Some(stage) => {
            let index = config
                .position_of(stage)
                .ok_or_else(|| usage(format!("config has no {} step", stage.as_str())))?;
            let state = starting_state(&read_stdin()?, &config, index, document)?;
            (state, config.starting_at(index))
        }
    };
    let report = evaluate_state(state, &config, &registry, clock.as_ref()).map_err(|e| match e {
        EvaluateError::Pipeline(f) => failure(f),
        other => failure(other),
    })?;
    emit(&report, &a.output, || check_table(&report))
}

fn check_table(r: &ResponseReport) -> String {
    let mut out = format!("{:<6} {:<8} {:>8}  claim\n", "id", "verdict", "evidence");
    for c in &r.claims {
        out.push_str(&format!(
            "{:<6} {:<8} {:>8}  {}\n",
            c.claim.id,
            c.verdict.label.as_str(),
            c.evidence_count,
            c.claim.text.replace('\n', " ")
        ));
    }
    let cred = r
        .credibility
        .map_or("n/a".to_string(), |c| format!("{:.0}%", c * 100.0));
    out.push_str(&format!(
        "credibility {cred}, overall {}, {:.3}s, ${:.4}\n",
        r.overall.as_str(),
        r.ledger_totals.time_seconds,
        r.ledger_totals.cost_usd
    ));
    out
}

fn llm_eval(a: LlmEvalArgs) -> Result<(), CliError> {
    let manifest = load_manifest(&a.manifest).map_err(|e| usage(format!("{}: {e}", a.manifest.display())))?;
    let csv = std::fs::File::open(&a.input).map_err(|e| usage(format!("{}: {e}", a.input.display())))?;
    let ingested = ingest_responses(csv, &manifest).map_err(usage)?;
    if !ingested.missing.is_empty() {
        eprintln!(
            "warning: no response for {} question(s): {}",
            ingested.missing.len(),
            ingested.missing.join(", ")
        );
    }
    let (registry, backend) = build_registry(&a.solvers)?;
    let checker = load_config(a.checker_config.as_deref(), &registry)?;
    let judge: Option<Arc<dyn TextGenerationBackend>> = match &a.judge_mock {
        Some(p) => Some(Arc::new(load_mock_backend(p).map_err(usage)?)),
        None => backend,
    };
    let lexicon = match &a.lexicon {
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            serde_json::from_slice::<UncertaintyLexicon>(&bytes).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => UncertaintyLexicon::default(),
    };
    let evaluator = LlmEvaluator {
        lexicon,
        judge: judge.map(|j| (j, TokenPricing::default())),
        checker: Some(FreeFormChecker {
            config: checker,
            registry: Arc::new(registry),
        }),
        jobs: a.jobs,
        timing: !a.no_timing,
    };
    let report = evaluator.run(&a.model, &ingested.rows).map_err(failure)?;
    let table = llm_table(&report);
    if !a.output.pretty {
        eprint!("{table}");
    }
    emit(&report, &a.output, || table.clone())
}

fn pct(x: Option<f64>) -> String {
    x.map_or("-".to_string(), |v| format!("{:.1}%", v * 100.0))
}

fn llm_table(r: &LlmReport) -> String {
    let mut out = format!(
        "{}\n{:<16} {:>9} {:>8} {:>9}\n",
        r.model_name, "subset", "evaluated", "skipped", "accuracy"
    );
    for s in &r.subsets {
        let acc = match s.status {
            SubsetStatus::Absent => "absent".to_string(),
            SubsetStatus::Evaluated => pct(s.accuracy),
        };
        out.push_str(&format!(
            "{:<16} {:>9} {:>8} {:>9}\n",
            s.subset.as_str(),
            s.n_evaluated,
            s.n_skipped,
            acc
        ));
    }
    for e in &r.error_types {
        out.push_str(&format!(
            "{:?}: {} rows, accuracy {}\n",
            e.error_type,
            e.n,
            pct(e.accuracy)
        ));
    }
    out
}

fn checker_eval(a: CheckerEvalArgs) -> Result<(), CliError> {
    let gold = load_factbench(&a.gold).map_err(|e| usage(format!("{}: {e}", a.gold.display())))?;
    let csv = std::fs::File::open(&a.input).map_err(|e| usage(format!("{}: {e}", a.input.display())))?;
    let ingested = ingest_verdicts(csv, &gold).map_err(usage)?;
    if !ingested.missing.is_empty() {
        eprintln!("warning: {} gold record(s) have no verdict", ingested.missing.len());
    }
    let metrics = score_submission(&ingested.rows).map_err(failure)?;
    let table = checker_table(&metrics);
    if !a.output.pretty {
        eprint!("{table}");
    }
    emit(&metrics, &a.output, || table.clone())
}

fn checker_table(m: &CheckerMetrics) -> String {
    format!(
        "n {} (binary {}, unknown gold {})\naccuracy {:.4}  macro-F1 {:.4}\n\
         True   P {:.4} R {:.4} F1 {:.4}\nFalse  P {:.4} R {:.4} F1 {:.4}\n\
         time {:.3}s  cost ${:.4}\n",
        m.n,
        m.n_binary,
        m.n_unknown_gold,
        m.accuracy,
        m.macro_f1,
        m.true_class.precision,
        m.true_class.recall,
        m.true_class.f1,
        m.false_class.precision,
        m.false_class.recall,
        m.false_class.f1,
        m.total_time_seconds,
        m.total_cost_usd
    )
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let parts = service::parts_from_data_dir(
        &a.data_dir,
        &PartsOptions {
            replay_only: a.replay_only,
            checker_config: a.checker_config.clone(),
            jobs: a.jobs,
        },
    )
    .map_err(usage)?;
    let mut config = ServiceConfig::new(&a.data_dir);
    config.workers = a.workers;
    config.job_timeout = std::time::Duration::from_secs(a.job_timeout_secs);
    config.cors_origins = a.cors_origin.clone();
    let rt = tokio::runtime::Runtime::new().map_err(failure)?;
    rt.block_on(async move {
        let state = service::start(config, parts).map_err(usage)?;
        service::serve(state, std::net::SocketAddr::new(a.host, a.port))
            .await
            .map_err(failure)
    })
}
