//! LLM-evaluation jobs: persisted records, a worker pool and crash recovery.

use std::sync::Arc;

use factcheck_core::checker::Submitter;
use serde::{Deserialize, Serialize};
use tokio::sync::{mpsc, Mutex};

use super::AppState;
use crate::clock::unix_millis;
use crate::llm_eval::ingest_responses;
use crate::store::Keyed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    LlmEval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct JobTimestamps {
    pub created: u64,
    pub started: Option<u64>,
    pub finished: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub kind: JobKind,
    pub status: JobStatus,
    pub model_name: String,
    pub submitted_by: Submitter,
    pub input_ref: String,
    pub result_ref: Option<String>,
    /// Failure reason when `status` is failed.
    pub error: Option<String>,
    pub webhook_url: Option<String>,
    /// Manifest questions without a response in the upload.
    pub missing_responses: usize,
    pub timestamps: JobTimestamps,
}

impl Keyed for Job {
    fn key(&self) -> &str {
        &self.id
    }
}

impl Job {
    pub fn new_llm_eval(
        id: String,
        model_name: String,
        submitted_by: Submitter,
        input_ref: String,
        webhook_url: Option<String>,
        missing_responses: usize,
    ) -> Self {
        Job {
            id,
            kind: JobKind::LlmEval,
            status: JobStatus::Queued,
            model_name,
            submitted_by,
            input_ref,
            result_ref: None,
            error: None,
            webhook_url,
            missing_responses,
            timestamps: JobTimestamps {
                created: unix_millis(),
                ..JobTimestamps::default()
            },
        }
    }

    fn started(mut self) -> Self {
        self.status = JobStatus::Running;
        self.timestamps.started = Some(unix_millis());
        self
    }

    fn finished(mut self, outcome: Result<String, String>) -> Self {
        match outcome {
            Ok(r) => {
                self.status = JobStatus::Done;
                self.result_ref = Some(r);
            }
            Err(e) => {
                self.status = JobStatus::Failed;
                self.error = Some(e);
            }
        }
        self.timestamps.finished = Some(unix_millis());
        self
    }

    fn requeued(mut self) -> Self {
        self.status = JobStatus::Queued;
        self.timestamps.started = None;
        self
    }

    pub fn is_finished(&self) -> bool {
        matches!(self.status, JobStatus::Done | JobStatus::Failed)
    }
}

pub type JobSender = mpsc::UnboundedSender<String>;

pub type JobReceiver = mpsc::UnboundedReceiver<String>;

pub fn job_channel() -> (JobSender, JobReceiver) {
    mpsc::unbounded_channel()
}

/// Starts `workers` tasks pulling job ids from `rx`.
pub fn spawn_workers(state: Arc<AppState>, rx: JobReceiver, workers: usize) {
    let rx = Arc::new(Mutex::new(rx));
    for _ in 0..workers.max(1) {
        let rx = rx.clone();
        let state = state.clone();
        tokio::spawn(async move {
            loop {
                let next = rx.lock().await.recv().await;
                let Some(id) = next else { break };
                run_job(&state, &id).await;
            }
        });
    }
}

/// Jobs left queued or running by a previous process, reset to queued, in
/// creation order.
pub fn recover(state: &AppState) -> std::io::Result<Vec<String>> {
    let mut pending: Vec<Job> = state
        .jobs
        .snapshot()
        .values()
        .filter(|j| !j.is_finished())
        .cloned()
        .collect();
    pending.sort_by(|a, b| a.timestamps.created.cmp(&b.timestamps.created).then(a.id.cmp(&b.id)));
    let mut ids = Vec::new();
    for job in pending {
        if job.status == JobStatus::Running {
            log::info!("re-queueing interrupted job {}", job.id);
            state.jobs.upsert(job.clone().requeued())?;
        }
        ids.push(job.id);
    }
    Ok(ids)
}

async fn run_job(state: &Arc<AppState>, id: &str) {
    let Some(job) = state.jobs.get(id) else {
        log::warn!("job {id} vanished from the store");
        return;
    };
    if job.status != JobStatus::Queued {
        return;
    }
    let job = job.started();
    if let Err(e) = state.jobs.upsert(job.clone()) {
        log::error!("cannot persist job {id}: {e}");
        return;
    }
    let worker_state = state.clone();
    let worker_job = job.clone();
    let task = tokio::task::spawn_blocking(move || execute(&worker_state, &worker_job));
    let outcome = match tokio::time::timeout(state.config.job_timeout, task).await {
        Ok(Ok(r)) => r,
        Ok(Err(e)) => Err(format!("worker crashed: {e}")),
        Err(_) => Err("timeout".to_string()),
    };
    let job = job.finished(outcome);
    if let Err(e) = state.jobs.upsert(job.clone()) {
        log::error!("cannot persist job {id}: {e}");
    }
    if let Some(url) = job.webhook_url.clone() {
        let body = serde_json::json!({ "job_id": job.id, "status": job.status });
        tokio::task::spawn_blocking(move || notify(&url, &body));
    }
}

fn notify(url: &str, body: &serde_json::Value) {
    let sent = reqwest::blocking::Client::new()
        .post(url)
        .timeout(std::time::Duration::from_secs(10))
        .json(body)
        .send();
    if let Err(e) = sent {
        log::warn!("webhook {url} failed: {e}");
    }
}

/// Runs the evaluation and stores the report; returns the report id.
fn execute(state: &AppState, job: &Job) -> Result<String, String> {
    let manifest = state.factqa.as_ref().ok_or("question manifest is not installed")?;
    let upload = std::fs::read(state.upload_path(&job.input_ref)).map_err(|e| format!("upload unavailable: {e}"))?;
    let ingested = ingest_responses(upload.as_slice(), manifest).map_err(|e| e.to_string())?;
    let report = state
        .evaluator
        .run(&job.model_name, &ingested.rows)
        .map_err(|e| e.to_string())?;
    let bytes = serde_json::to_vec_pretty(&report).map_err(|e| e.to_string())?;
    let path = state.report_path(&job.id);
    std::fs::create_dir_all(path.parent().expect("reports dir")).map_err(|e| e.to_string())?;
    crate::web::write_atomic(&path, &bytes).map_err(|e| e.to_string())?;
    Ok(job.id.clone())
}
