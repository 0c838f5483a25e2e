//! HTTP service over the evaluators.
//!
//! Data directory layout:
//!
//! ```text
//! datasets/factqa.jsonl     question manifest (optional)
//! datasets/factbench.jsonl  checker gold set (optional)
//! configs/*.yaml            extra named pipeline configs
//! corpus.jsonl              offline retrieval corpus
//! mock_llm.json             canned backend script, used when no LLM key is set
//! cache/search, cache/llm   record/replay caches
//! uploads/, reports/        llm-eval inputs and outputs
//! store/                    job and leaderboard logs
//! web/                      static files served at /
//! ```

mod jobs;
mod routes;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use factcheck_core::checker::LeaderboardEntry;
use factcheck_core::llm_eval::DatasetManifest;
use factcheck_core::{PipelineConfig, Registry, TextGenerationBackend};

pub use jobs::{Job, JobKind, JobStatus, JobTimestamps};
pub use routes::router;

use crate::checker_eval::{load_factbench, GoldSet};
use crate::corpus::load_corpus;
use crate::llm_backend::{load_mock_backend, pricing_from_env, CachedBackend, ChatCompletionsBackend};
use crate::llm_eval::{load_manifest, FreeFormChecker, LlmEvaluator};
use crate::registry::{load_config_catalog, SolverSet};
use crate::store::{JsonStore, Keyed};
use crate::web::{EvidenceCache, SerperProvider, WebSearch};

impl Keyed for LeaderboardEntry {
    fn key(&self) -> &str {
        &self.id
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub workers: usize,
    pub job_timeout: Duration,
    pub max_upload_bytes: usize,
    /// Allowed CORS origins; empty allows any.
    pub cors_origins: Vec<String>,
}

impl ServiceConfig {
    pub const DEFAULT_WORKERS: usize = 2;
    pub const DEFAULT_JOB_TIMEOUT: Duration = Duration::from_secs(2 * 60 * 60);
    pub const DEFAULT_MAX_UPLOAD: usize = 50 * 1024 * 1024;

    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            data_dir: data_dir.into(),
            workers: Self::DEFAULT_WORKERS,
            job_timeout: Self::DEFAULT_JOB_TIMEOUT,
            max_upload_bytes: Self::DEFAULT_MAX_UPLOAD,
            cors_origins: Vec::new(),
        }
    }
}

/// Solvers, named pipelines and the LLM evaluator the service runs with.
#[derive(Clone)]
pub struct ServiceParts {
    pub registry: Arc<Registry>,
    pub pipelines: BTreeMap<String, PipelineConfig>,
    pub evaluator: LlmEvaluator,
}

/// Options for assembling [`ServiceParts`] from a data directory.
#[derive(Debug, Clone, Default)]
pub struct PartsOptions {
    /// Never call remote providers; cache misses fail.
    pub replay_only: bool,
    /// Pipeline used for free-form answers in llm-eval (default `offline`).
    pub checker_config: Option<String>,
    pub jobs: usize,
}

/// Builds solvers and pipelines from the data directory and environment.
/// The LLM backend is the chat-completions endpoint when its key is set,
/// else `mock_llm.json` when present; either way behind the record/replay
/// cache.
pub fn parts_from_data_dir(data_dir: &Path, opts: &PartsOptions) -> anyhow::Result<ServiceParts> {
    let corpus_path = data_dir.join("corpus.jsonl");
    let corpus = if corpus_path.exists() {
        load_corpus(&corpus_path)?
    } else {
        Vec::new()
    };
    let web = WebSearch::new(
        Arc::new(SerperProvider::default()),
        EvidenceCache::new(data_dir.join("cache/search")),
    )
    .with_env_key()
    .replay_only(opts.replay_only);
    let mut set = SolverSet::offline(corpus).with_web(Arc::new(web));
    let llm_cache = data_dir.join("cache/llm");
    let mock_path = data_dir.join("mock_llm.json");
    let backend: Option<Arc<dyn TextGenerationBackend>> = match ChatCompletionsBackend::from_env() {
        Some(b) if !opts.replay_only => Some(Arc::new(CachedBackend::record(Arc::new(b), llm_cache))),
        Some(b) => Some(Arc::new(CachedBackend::replay(b.model.clone(), llm_cache))),
        None if mock_path.exists() => Some(Arc::new(load_mock_backend(&mock_path)?)),
        None => None,
    };
    if let Some(b) = &backend {
        set = set.with_llm(b.clone(), pricing_from_env());
    }
    let registry = Arc::new(set.build());
    let pipelines = load_config_catalog(Some(&data_dir.join("configs")), &registry)?;
    let checker_name = opts.checker_config.as_deref().unwrap_or("offline");
    let checker = pipelines
        .get(checker_name)
        .ok_or_else(|| anyhow::anyhow!("no pipeline config named `{checker_name}`"))?
        .clone();
    let evaluator = LlmEvaluator {
        judge: backend.map(|b| (b, pricing_from_env())),
        checker: Some(FreeFormChecker {
            config: checker,
            registry: registry.clone(),
        }),
        jobs: opts.jobs.max(1),
        ..LlmEvaluator::default()
    };
    Ok(ServiceParts {
        registry,
        pipelines,
        evaluator,
    })
}

pub struct AppState {
    pub config: ServiceConfig,
    pub registry: Arc<Registry>,
    pub pipelines: BTreeMap<String, PipelineConfig>,
    pub evaluator: LlmEvaluator,
    pub factqa: Option<Arc<DatasetManifest>>,
    pub factbench: Option<Arc<GoldSet>>,
    pub jobs: JsonStore<Job>,
    pub leaderboard: JsonStore<LeaderboardEntry>,
    queue: jobs::JobSender,
}

pub const DATASETS: [&str; 2] = ["factqa", "factbench"];

pub fn dataset_path(data_dir: &Path, name: &str) -> PathBuf {
    data_dir.join("datasets").join(format!("{name}.jsonl"))
}

impl AppState {
    pub fn upload_path(&self, input_ref: &str) -> PathBuf {
        self.config.data_dir.join("uploads").join(format!("{input_ref}.csv"))
    }

    pub fn report_path(&self, job_id: &str) -> PathBuf {
        self.config.data_dir.join("reports").join(format!("{job_id}.json"))
    }

    pub fn enqueue(&self, job_id: String) {
        if self.queue.send(job_id).is_err() {
            log::error!("job queue is closed");
        }
    }
}

/// Opens stores, loads installed datasets, starts the worker pool and
/// re-queues unfinished jobs. Must run inside a Tokio runtime.
pub fn start(config: ServiceConfig, parts: ServiceParts) -> anyhow::Result<Arc<AppState>> {
    let dir = &config.data_dir;
    let store_dir = dir.join("store");
    let factqa_path = dataset_path(dir, "factqa");
    let factqa = if factqa_path.exists() {
        Some(Arc::new(load_manifest(&factqa_path)?))
    } else {
        None
    };
    let factbench_path = dataset_path(dir, "factbench");
    let factbench = if factbench_path.exists() {
        Some(Arc::new(load_factbench(&factbench_path)?))
    } else {
        None
    };
    let (tx, rx) = jobs::job_channel();
    let workers = config.workers;
    let state = Arc::new(AppState {
        jobs: JsonStore::open(&store_dir, "jobs")?,
        leaderboard: JsonStore::open(&store_dir, "leaderboard")?,
        config,
        registry: parts.registry,
        pipelines: parts.pipelines,
        evaluator: parts.evaluator,
        factqa,
        factbench,
        queue: tx,
    });
    jobs::spawn_workers(state.clone(), rx, workers);
    for id in jobs::recover(&state)? {
        state.enqueue(id);
    }
    Ok(state)
}

/// Serves until ctrl-c.
pub async fn serve(state: Arc<AppState>, addr: std::net::SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
