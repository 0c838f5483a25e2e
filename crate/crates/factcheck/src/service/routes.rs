use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use factcheck_core::checker::{best_per_checker, rank_leaderboard, LeaderboardEntry, Submitter};
use factcheck_core::pipeline::RawPipelineConfig;
use factcheck_core::response::EvaluateError;
use factcheck_core::{evaluate_response, PipelineConfig, PipelineError};
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use tower_http::services::ServeDir;

use super::jobs::Job;
use super::{dataset_path, AppState, DATASETS};
use crate::checker_eval::{ingest_verdicts, run_local_checker, score_submission, VerdictIngestError};
use crate::clock::{unix_millis, SystemClock};
use crate::digest::sha256_hex;
use crate::llm_eval::ingest_responses;

type Shared = Arc<AppState>;

pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl std::fmt::Display) -> Self {
        ApiError {
            status,
            body: json!({ "error": message.to_string() }),
        }
    }

    fn with(mut self, key: &str, value: Value) -> Self {
        self.body[key] = value;
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn bad_request(m: impl std::fmt::Display) -> ApiError {
    ApiError::new(StatusCode::BAD_REQUEST, m)
}

fn not_found(m: impl std::fmt::Display) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, m)
}

fn internal(m: impl std::fmt::Display) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, m)
}

fn json_bytes(status: StatusCode, bytes: Vec<u8>) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

pub fn router(state: Shared) -> Router {
    let cors = if state.config.cors_origins.is_empty() {
        CorsLayer::new().allow_origin(Any)
    } else {
        let origins: Vec<HeaderValue> = state
            .config
            .cors_origins
            .iter()
            .filter_map(|o| o.parse().ok())
            .collect();
        CorsLayer::new().allow_origin(AllowOrigin::list(origins))
    }
    .allow_methods([Method::GET, Method::POST])
    .allow_headers(Any)
    .expose_headers([
        header::LOCATION,
        header::HeaderName::from_static("x-content-sha256"),
        header::HeaderName::from_static("x-entry-id"),
    ]);
    let web_dir = state.config.data_dir.join("web");
    let limit = state.config.max_upload_bytes;
    Router::new()
        .route("/v1/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/v1/solvers", get(solvers))
        .route("/v1/configs", get(configs))
        .route("/v1/check", post(check))
        .route("/v1/llm-eval", post(submit_llm_eval))
        .route("/v1/llm-eval/{id}", get(get_llm_eval))
        .route("/v1/llm-eval/{id}/report", get(get_llm_report))
        .route("/v1/checker-eval", post(checker_eval))
        .route("/v1/leaderboard", get(leaderboard))
        .route("/v1/leaderboard/entries/{id}", get(leaderboard_entry))
        .route("/v1/datasets/{name}", get(dataset))
        .fallback_service(ServeDir::new(web_dir))
        .layer(DefaultBodyLimit::max(limit))
        .layer(cors)
        .with_state(state)
}

async fn solvers(State(state): State<Shared>) -> Json<Value> {
    Json(json!({ "solvers": state.registry.list() }))
}

async fn configs(State(state): State<Shared>) -> Json<BTreeMap<String, PipelineConfig>> {
    Json(state.pipelines.clone())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckRequest {
    text: String,
    #[serde(default)]
    config_name: Option<String>,
    /// Inline pipeline instead of a named one.
    #[serde(default)]
    pipeline: Option<RawPipelineConfig>,
}

async fn check(
    State(state): State<Shared>,
    body: Result<Json<CheckRequest>, axum::extract::rejection::JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = body.map_err(|e| bad_request(e.body_text()))?;
    if req.text.trim().is_empty() {
        return Err(bad_request("text is empty"));
    }
    let config = match (req.config_name, req.pipeline) {
        (Some(_), Some(_)) => return Err(bad_request("give config_name or pipeline, not both")),
        (None, Some(raw)) => PipelineConfig::resolve(raw, &state.registry).map_err(bad_request)?,
        (name, None) => {
            let name = name.unwrap_or_else(|| "offline".into());
            state
                .pipelines
                .get(&name)
                .cloned()
                .ok_or_else(|| not_found(format!("unknown config `{name}`")))?
        }
    };
    let worker = state.clone();
    let text = req.text;
    let result =
        tokio::task::spawn_blocking(move || evaluate_response(&text, &config, &worker.registry, &SystemClock::new()))
            .await
            .map_err(internal)?;
    match result {
        Ok(report) => Ok(Json(report).into_response()),
        Err(EvaluateError::Pipeline(failure)) => match &failure.error {
            PipelineError::SolverFailure { name, stage, message } => {
                Err(ApiError::new(StatusCode::BAD_GATEWAY, &failure)
                    .with("solver", json!(name))
                    .with("stage", json!(stage))
                    .with("message", json!(message)))
            }
            _ => Err(internal(failure)),
        },
        Err(e) => Err(internal(e)),
    }
}

/// Text fields plus the uploaded file of a multipart form.
struct Form {
    fields: BTreeMap<String, String>,
    file: Option<Vec<u8>>,
}

impl Form {
    async fn read(mut mp: Multipart) -> Result<Form, ApiError> {
        let mut fields = BTreeMap::new();
        let mut file = None;
        while let Some(field) = mp.next_field().await.map_err(|e| bad_request(e.body_text()))? {
            let name = field.name().unwrap_or_default().to_string();
            if name == "file" {
                file = Some(field.bytes().await.map_err(|e| bad_request(e.body_text()))?.to_vec());
            } else {
                let value = field.text().await.map_err(|e| bad_request(e.body_text()))?;
                fields.insert(name, value);
            }
        }
        Ok(Form { fields, file })
    }

    fn required(&self, name: &str) -> Result<String, ApiError> {
        self.optional(name)
            .ok_or_else(|| bad_request(format!("missing form field `{name}`")))
    }

    fn optional(&self, name: &str) -> Option<String> {
        self.fields
            .get(name)
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
    }

    fn submitter(&self) -> Result<Submitter, ApiError> {
        let name = self.required("name")?;
        let email = self.required("email")?;
        if !email.contains('@') {
            return Err(bad_request("`email` is not an email address"));
        }
        let opt_in = match self.optional("opt_in").as_deref() {
            None => false,
            Some(v) => match v.to_ascii_lowercase().as_str() {
                "true" | "1" | "on" | "yes" => true,
                "false" | "0" | "off" | "no" => false,
                _ => return Err(bad_request(format!("`opt_in` must be a boolean, got `{v}`"))),
            },
        };
        Ok(Submitter { name, email, opt_in })
    }

    fn take_file(&mut self) -> Result<Vec<u8>, ApiError> {
        self.file
            .take()
            .ok_or_else(|| bad_request("missing file upload `file`"))
    }
}

async fn submit_llm_eval(State(state): State<Shared>, mp: Multipart) -> Result<Response, ApiError> {
    let mut form = Form::read(mp).await?;
    let model_name = form.required("model_name")?;
    let submitter = form.submitter()?;
    let webhook_url = form.optional("webhook_url");
    let bytes = form.take_file()?;
    let manifest = state
        .factqa
        .clone()
        .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "question manifest is not installed"))?;
    let ingested = ingest_responses(bytes.as_slice(), &manifest).map_err(|e| {
        let err = bad_request(&e);
        match &e {
            crate::llm_eval::IngestError::Row { row, .. } | crate::llm_eval::IngestError::DuplicateRow { row, .. } => {
                err.with("rows", json!([row]))
            }
            crate::llm_eval::IngestError::UnknownQuestion(ids) => err.with("unknown_ids", json!(ids)),
            _ => err,
        }
    })?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let upload = state.upload_path(&id);
    let store = |r: std::io::Result<()>| r.map_err(internal);
    store(std::fs::create_dir_all(upload.parent().expect("uploads dir")))?;
    store(crate::web::write_atomic(&upload, &bytes))?;
    let job = Job::new_llm_eval(
        id.clone(),
        model_name,
        submitter,
        id.clone(),
        webhook_url,
        ingested.missing.len(),
    );
    store(state.jobs.upsert(job))?;
    state.enqueue(id.clone());
    let mut headers = HeaderMap::new();
    if let Ok(v) = HeaderValue::from_str(&format!("/v1/llm-eval/{id}")) {
        headers.insert(header::LOCATION, v);
    }
    Ok((
        StatusCode::ACCEPTED,
        headers,
        Json(json!({ "job_id": id, "missing_responses": ingested.missing })),
    )
        .into_response())
}

fn stored_report(state: &AppState, job: &Job) -> Result<Option<Vec<u8>>, ApiError> {
    match &job.result_ref {
        None => Ok(None),
        Some(r) => std::fs::read(state.report_path(r)).map(Some).map_err(internal),
    }
}

async fn get_llm_eval(State(state): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let job = state
        .jobs
        .get(&id)
        .ok_or_else(|| not_found(format!("unknown job `{id}`")))?;
    let mut body = b"{\"job\":".to_vec();
    body.extend(serde_json::to_vec(&job).map_err(internal)?);
    if let Some(report) = stored_report(&state, &job)? {
        body.extend_from_slice(b",\"report\":");
        body.extend(report);
    }
    body.push(b'}');
    Ok(json_bytes(StatusCode::OK, body))
}

async fn get_llm_report(State(state): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let job = state
        .jobs
        .get(&id)
        .ok_or_else(|| not_found(format!("unknown job `{id}`")))?;
    let report = stored_report(&state, &job)?.ok_or_else(|| not_found(format!("job `{id}` has no report yet")))?;
    Ok(json_bytes(StatusCode::OK, report))
}

async fn checker_eval(State(state): State<Shared>, mp: Multipart) -> Result<Response, ApiError> {
    let mut form = Form::read(mp).await?;
    let checker_name = form.required("checker_name")?;
    let submitter = form.submitter()?;
    let gold = state
        .factbench
        .clone()
        .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "gold set is not installed"))?;
    let local = form.optional("config_name");
    let worker = state.clone();
    let bytes = if local.is_none() { Some(form.take_file()?) } else { None };
    let scored = tokio::task::spawn_blocking(move || match (local, bytes) {
        (Some(name), _) => {
            let config = worker
                .pipelines
                .get(&name)
                .ok_or_else(|| not_found(format!("unknown config `{name}`")))?;
            let rows = run_local_checker(&gold.records, config, &worker.registry, &SystemClock::new());
            score_submission(&rows).map_err(bad_request)
        }
        (None, Some(bytes)) => {
            let ingested = ingest_verdicts(bytes.as_slice(), &gold).map_err(|e| match &e {
                VerdictIngestError::Format(rows) => bad_request(&e).with(
                    "rows",
                    json!(rows
                        .iter()
                        .map(|r| json!({"row": r.row, "message": r.message}))
                        .collect::<Vec<_>>()),
                ),
                VerdictIngestError::UnknownClaim(ids) => {
                    ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, &e).with("unknown_ids", json!(ids))
                }
                VerdictIngestError::Header(_) => bad_request(&e),
            })?;
            score_submission(&ingested.rows).map_err(bad_request)
        }
        (None, None) => Err(bad_request("missing file upload `file`")),
    })
    .await
    .map_err(internal)??;
    let entry = LeaderboardEntry {
        id: uuid::Uuid::new_v4().simple().to_string(),
        checker_name,
        submitter,
        metrics: scored,
        submitted_at: unix_millis(),
    };
    let store = state.clone();
    let persisted = entry.clone();
    tokio::task::spawn_blocking(move || store.leaderboard.upsert(persisted))
        .await
        .map_err(internal)?
        .map_err(internal)?;
    let mut headers = HeaderMap::new();
    if let Ok(v) = HeaderValue::from_str(&entry.id) {
        headers.insert("x-entry-id", v);
    }
    if let Ok(v) = HeaderValue::from_str(&format!("/v1/leaderboard/entries/{}", entry.id)) {
        headers.insert(header::LOCATION, v);
    }
    Ok((StatusCode::OK, headers, Json(entry.metrics)).into_response())
}

#[derive(Deserialize)]
struct LeaderboardQuery {
    #[serde(default)]
    all: bool,
}

async fn leaderboard(State(state): State<Shared>, Query(q): Query<LeaderboardQuery>) -> Json<Vec<LeaderboardEntry>> {
    let entries: Vec<LeaderboardEntry> = state.leaderboard.snapshot().values().cloned().collect();
    Json(if q.all {
        rank_leaderboard(&entries)
    } else {
        best_per_checker(&entries)
    })
}

#[derive(Deserialize)]
struct OwnerQuery {
    email: Option<String>,
}

async fn leaderboard_entry(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<OwnerQuery>,
) -> Result<Json<LeaderboardEntry>, ApiError> {
    let missing = || not_found(format!("unknown entry `{id}`"));
    let entry = state.leaderboard.get(&id).ok_or_else(missing)?;
    let owner = q
        .email
        .as_deref()
        .is_some_and(|e| e.trim().eq_ignore_ascii_case(entry.submitter.email.trim()));
    if entry.submitter.opt_in || owner {
        Ok(Json(entry))
    } else {
        Err(missing())
    }
}

async fn dataset(State(state): State<Shared>, Path(name): Path<String>) -> Result<Response, ApiError> {
    if !DATASETS.contains(&name.as_str()) {
        return Err(not_found(format!("unknown dataset `{name}`")));
    }
    let path = dataset_path(&state.config.data_dir, &name);
    let bytes = match tokio::fs::read(&path).await {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(not_found(format!("dataset `{name}` is not installed")))
        }
        Err(e) => return Err(internal(e)),
    };
    let digest = sha256_hex(&bytes);
    Ok((
        StatusCode::OK,
        [
            (header::CONTENT_TYPE, "application/x-ndjson".to_string()),
            (header::HeaderName::from_static("x-content-sha256"), digest),
            (
                header::CONTENT_DISPOSITION,
                format!("attachment; filename=\"{name}.jsonl\""),
            ),
        ],
        bytes,
    )
        .into_response())
}
