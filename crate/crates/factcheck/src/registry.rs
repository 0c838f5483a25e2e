//! Assembling the solver registry and named pipeline configs.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use factcheck_core::backend::TokenPricing;
use factcheck_core::bm25::{Bm25Index, CorpusDocument};
use factcheck_core::solvers;
use factcheck_core::stance::{LexicalStance, StanceClassifier};
use factcheck_core::{PipelineConfig, Registry, TextGenerationBackend};

use crate::config::{load_pipeline_config, load_pipeline_config_file, ConfigLoadError};
use crate::web::{web_retriever, WebSearch};

/// The all-offline reference pipeline.
pub const OFFLINE_CONFIG: &str = "\
solvers:
  - name: rule_splitter
    stage: claim_processor
    input_name: document
    output_name: claims
  - name: bm25_retriever
    stage: retriever
    input_name: claims
    output_name: evidence
    params: { top_k: 5 }
  - name: nli_verifier
    stage: verifier
    input_name: evidence
    output_name: verdicts
start_index: 0
";

/// What to register beyond the always-available rule splitter.
pub struct SolverSet {
    pub corpus: Vec<CorpusDocument>,
    pub stance: Arc<dyn StanceClassifier>,
    pub web: Option<Arc<WebSearch>>,
    pub llm: Option<(Arc<dyn TextGenerationBackend>, TokenPricing)>,
}

impl SolverSet {
    pub fn offline(corpus: Vec<CorpusDocument>) -> Self {
        SolverSet {
            corpus,
            stance: Arc::new(LexicalStance::default()),
            web: None,
            llm: None,
        }
    }

    pub fn with_web(mut self, web: Arc<WebSearch>) -> Self {
        self.web = Some(web);
        self
    }

    pub fn with_llm(mut self, backend: Arc<dyn TextGenerationBackend>, pricing: TokenPricing) -> Self {
        self.llm = Some((backend, pricing));
        self
    }

    pub fn build(self) -> Registry {
        let mut reg = Registry::new();
        let mut add = |d| {
            reg.register(d).expect("built-in descriptors are complete");
        };
        add(solvers::rule_splitter());
        add(solvers::bm25_retriever(Arc::new(Bm25Index::new(self.corpus))));
        add(solvers::nli_verifier(self.stance));
        if let Some(web) = self.web {
            add(web_retriever(web));
        }
        if let Some((backend, pricing)) = self.llm {
            add(solvers::llm_decomposer(backend.clone(), pricing));
            add(solvers::llm_verifier(backend, pricing));
        }
        reg
    }
}

/// rule_splitter, bm25_retriever and nli_verifier over `corpus`.
pub fn offline_registry(corpus: Vec<CorpusDocument>) -> Registry {
    SolverSet::offline(corpus).build()
}

/// Named configs: the built-in `offline` one plus every `*.yaml`/`*.yml`
/// file in `dir`, named by file stem. Configs naming solvers that are not
/// registered are skipped with a warning.
pub fn load_config_catalog(
    dir: Option<&Path>,
    registry: &Registry,
) -> Result<BTreeMap<String, PipelineConfig>, ConfigLoadError> {
    let mut out = BTreeMap::new();
    out.insert("offline".to_string(), load_pipeline_config(OFFLINE_CONFIG, registry)?);
    let Some(dir) = dir else { return Ok(out) };
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
        Err(source) => {
            return Err(ConfigLoadError::Io {
                path: dir.display().to_string(),
                source,
            })
        }
    };
    let mut paths: Vec<_> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for path in paths {
        let is_yaml = matches!(path.extension().and_then(|e| e.to_str()), Some("yaml" | "yml"));
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        if !is_yaml {
            continue;
        }
        match load_pipeline_config_file(&path, registry) {
            Ok(cfg) => {
                out.insert(stem.to_string(), cfg);
            }
            Err(ConfigLoadError::UnknownSolver(name)) => {
                log::warn!("config `{stem}` skipped: solver `{name}` is not available");
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
