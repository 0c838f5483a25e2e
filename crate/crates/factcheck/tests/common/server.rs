//! Loopback HTTP harness around the service.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use factcheck::config::load_pipeline_config;
use factcheck::core::backend::TokenPricing;
use factcheck::core::checker::{Dataset, LabelCounts};
use factcheck::core::solvers::llm_verifier;
use factcheck::core::MockBackend;
use factcheck::jsonl::write_with_header;
use factcheck::llm_eval::LlmEvaluator;
use factcheck::registry::OFFLINE_CONFIG;
use factcheck::service::{router, start, AppState, ServiceConfig, ServiceParts};
use reqwest::multipart::{Form, Part};
use reqwest::StatusCode;
use serde_json::Value;

use super::*;

pub struct Server {
    pub base: String,
    pub state: Arc<AppState>,
    pub client: reqwest::Client,
}

impl Server {
    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub async fn get(&self, path: &str) -> reqwest::Response {
        self.client.get(self.url(path)).send().await.unwrap()
    }

    pub async fn post_json(&self, path: &str, body: Value) -> (StatusCode, Value) {
        let r = self.client.post(self.url(path)).json(&body).send().await.unwrap();
        (r.status(), r.json().await.unwrap())
    }

    pub async fn post_form(&self, path: &str, form: Form) -> reqwest::Response {
        self.client.post(self.url(path)).multipart(form).send().await.unwrap()
    }

    pub async fn job(&self, id: &str) -> Value {
        self.get(&format!("/v1/llm-eval/{id}")).await.json().await.unwrap()
    }

    pub async fn wait_for(&self, id: &str, status: &str) -> Value {
        let deadline = Instant::now() + Duration::from_secs(30);
        loop {
            let body = self.job(id).await;
            if body["job"]["status"] == status {
                return body;
            }
            assert!(Instant::now() < deadline, "job {id} stuck: {body}");
            tokio::time::sleep(Duration::from_millis(20)).await;
        }
    }
}

/// Installs the synthetic question manifest and a gold set of `gold` counts.
pub fn install_datasets(dir: &Path, gold: &[(Dataset, LabelCounts)]) {
    let datasets = dir.join("datasets");
    std::fs::create_dir_all(&datasets).unwrap();
    let rows = synthetic_rows();
    let manifest = synthetic_manifest(&rows);
    let header = factcheck::core::llm_eval::ManifestHeader {
        name: manifest.name.clone(),
        declared_counts: manifest.declared_counts.clone(),
        total: manifest.declared_total,
    };
    std::fs::write(
        datasets.join("factqa.jsonl"),
        write_with_header(&header, &manifest.records),
    )
    .unwrap();
    if !gold.is_empty() {
        std::fs::write(
            datasets.join("factbench.jsonl"),
            write_with_header(&gold_header(gold), &gold_records(gold)),
        )
        .unwrap();
    }
}

/// Replayed web search, the scripted LLM, a verifier that always fails,
/// and three named pipelines.
pub fn parts(dir: &Path, evaluator: LlmEvaluator) -> (ServiceParts, Arc<NoNetwork>) {
    let (mut registry, net, _) = full_registry(&dir.join("cache"));
    let mut flaky = llm_verifier(Arc::new(MockBackend::constant("no idea")), TokenPricing::default());
    flaky.name = "flaky_verifier".into();
    registry.register(flaky).unwrap();
    let mut pipelines = BTreeMap::new();
    pipelines.insert(
        "offline".to_string(),
        load_pipeline_config(OFFLINE_CONFIG, &registry).unwrap(),
    );
    let web = config_yaml("rule_splitter", "web_retriever", "nli_verifier", "");
    pipelines.insert("web".to_string(), load_pipeline_config(&web, &registry).unwrap());
    let broken = config_yaml("rule_splitter", "bm25_retriever", "flaky_verifier", "");
    pipelines.insert("broken".to_string(), load_pipeline_config(&broken, &registry).unwrap());
    let parts = ServiceParts {
        registry: Arc::new(registry),
        pipelines,
        evaluator,
    };
    (parts, net)
}

pub async fn launch(dir: &Path, workers: usize, parts: ServiceParts) -> Server {
    let mut config = ServiceConfig::new(dir);
    config.workers = workers;
    let state = start(config, parts).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let app = router(state.clone());
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    Server {
        base,
        state,
        client: reqwest::Client::new(),
    }
}

pub fn submitter(form: Form, email: &str, opt_in: bool) -> Form {
    form.text("name", "Tester")
        .text("email", email.to_string())
        .text("opt_in", opt_in.to_string())
}

pub fn csv_part(text: String) -> Part {
    Part::bytes(text.into_bytes())
        .file_name("upload.csv")
        .mime_str("text/csv")
        .unwrap()
}

pub fn llm_form(csv: String) -> Form {
    submitter(Form::new().text("model_name", "mock-model"), "a@example.org", true).part("file", csv_part(csv))
}
