//! File-level LLM factuality evaluation: manifest loading, response
//! ingestion and per-row scoring.

use std::collections::{BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use factcheck_core::backend::TokenPricing;
use factcheck_core::llm_eval::{
    aggregate_report, eval_exact_match, judge_prompt, parse_judge_output, DatasetManifest, EmptyEvaluationError,
    EvaluatedRow, LlmReport, ManifestError, ManifestHeader, QuestionRecord, RowResult, Scoring, UncertaintyLexicon,
};
use factcheck_core::response::EvaluateError;
use factcheck_core::{
    evaluate_response, BackendError, Clock, GenerationParams, Label, PipelineConfig, Registry, TextGenerationBackend,
    ZeroClock,
};
use rayon::prelude::*;

use crate::clock::SystemClock;
use crate::jsonl::{read_with_header, JsonlError};

#[derive(Debug, thiserror::Error)]
pub enum ManifestLoadError {
    #[error("cannot read manifest: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Invalid(#[from] ManifestError),
}

pub fn read_manifest<R: std::io::BufRead>(reader: R) -> Result<DatasetManifest, ManifestLoadError> {
    let (header, records): (ManifestHeader, Vec<QuestionRecord>) = read_with_header(reader).map_err(|e| match e {
        JsonlError::Io(e) => ManifestLoadError::Io(e),
        other => ManifestLoadError::Schema(other.to_string()),
    })?;
    Ok(DatasetManifest::new(header, records)?)
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest, ManifestLoadError> {
    let file = std::fs::File::open(path)?;
    read_manifest(std::io::BufReader::new(file))
}

/// Rows joined to reference data, plus reference ids with no row.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested<T> {
    pub rows: Vec<T>,
    pub missing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IngestError {
    #[error("expected header `{expected}`, found `{found}`")]
    Header { expected: &'static str, found: String },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("unknown question ids: {}", .0.join(", "))]
    UnknownQuestion(Vec<String>),
    #[error("row {row}: duplicate question id `{id}`")]
    DuplicateRow { row: usize, id: String },
}

pub const RESPONSES_HEADER: &str = "question_id,response";

fn strip_bom(s: &str) -> &str {
    s.trim_start_matches('\u{feff}')
}

/// Joins an uploaded `question_id,response` CSV to `manifest`. Row numbers
/// count data rows from 1.
pub fn ingest_responses<R: Read>(
    reader: R,
    manifest: &DatasetManifest,
) -> Result<Ingested<(QuestionRecord, String)>, IngestError> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = csv.headers().map_err(|e| IngestError::Header {
        expected: RESPONSES_HEADER,
        found: e.to_string(),
    })?;
    let names: Vec<&str> = headers.iter().map(|h| strip_bom(h).trim()).collect();
    if names != ["question_id", "response"] {
        return Err(IngestError::Header {
            expected: RESPONSES_HEADER,
            found: names.join(","),
        });
    }
    let index: HashMap<&str, &QuestionRecord> = manifest.records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut seen = BTreeSet::new();
    let mut unknown = Vec::new();
    let mut rows = Vec::new();
    for (i, rec) in csv.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| IngestError::Row {
            row,
            message: e.to_string(),
        })?;
        let id = rec[0].trim().to_string();
        let response = rec[1].to_string();
        if !seen.insert(id.clone()) {
            return Err(IngestError::DuplicateRow { row, id });
        }
        match index.get(id.as_str()) {
            Some(record) => rows.push(((*record).clone(), response)),
            None => unknown.push(id),
        }
    }
    if !unknown.is_empty() {
        return Err(IngestError::UnknownQuestion(unknown));
    }
    let missing: Vec<String> = manifest
        .records
        .iter()
        .filter(|r| !seen.contains(&r.id))
        .map(|r| r.id.clone())
        .collect();
    if !missing.is_empty() {
        log::warn!(
            "{} of {} manifest questions have no response",
            missing.len(),
            manifest.records.len()
        );
    }
    Ok(Ingested { rows, missing })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JudgeError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("judge output not `correct`/`incorrect`: {0:?}")]
    Parse(String),
}

/// Grades one answer with `judge`. Returns correctness and the call's cost.
pub fn eval_judge(
    record: &QuestionRecord,
    response: &str,
    judge: &dyn TextGenerationBackend,
    pricing: TokenPricing,
) -> Result<(bool, f64), JudgeError> {
    let generation = judge.generate(&judge_prompt(record, response), &GenerationParams::default())?;
    let cost = pricing.cost(&generation);
    parse_judge_output(&generation.text)
        .map(|ok| (ok, cost))
        .ok_or(JudgeError::Parse(generation.text))
}

/// Fact-checks a free-form answer, returning per-label claim counts and the
/// pipeline cost.
pub fn eval_freeform(
    response: &str,
    config: &PipelineConfig,
    registry: &Registry,
    clock: &dyn Clock,
) -> Result<(RowResult, f64, f64), EvaluateError> {
    let report = evaluate_response(response, config, registry, clock)?;
    let count = |l: Label| report.claims.iter().filter(|c| c.verdict.label == l).count();
    Ok((
        RowResult::FreeForm {
            n_true: count(Label::True),
            n_false: count(Label::False),
            n_unknown: count(Label::Unknown),
        },
        report.ledger_totals.cost_usd,
        report.ledger_totals.time_seconds,
    ))
}

/// Pipeline used to check free-form answers.
#[derive(Clone)]
pub struct FreeFormChecker {
    pub config: PipelineConfig,
    pub registry: Arc<Registry>,
}

/// Row scorer with a bounded worker count.
#[derive(Clone)]
pub struct LlmEvaluator {
    pub lexicon: UncertaintyLexicon,
    pub judge: Option<(Arc<dyn TextGenerationBackend>, TokenPricing)>,
    pub checker: Option<FreeFormChecker>,
    pub jobs: usize,
    /// Record wall time per row. Off gives reproducible report bytes.
    pub timing: bool,
}

impl Default for LlmEvaluator {
    fn default() -> Self {
        LlmEvaluator {
            lexicon: UncertaintyLexicon::default(),
            judge: None,
            checker: None,
            jobs: 1,
            timing: true,
        }
    }
}

fn skipped(reason: impl Into<String>) -> RowResult {
    RowResult::Skipped { reason: reason.into() }
}

impl LlmEvaluator {
    pub fn evaluate_row(&self, record: &QuestionRecord, response: &str) -> EvaluatedRow {
        let started = Instant::now();
        let (result, cost, pipeline_time) = match record.subset.scoring() {
            Scoring::YesNo | Scoring::SelfAware => match eval_exact_match(record, response, &self.lexicon) {
                Ok(r) => (r, 0.0, None),
                Err(e) => (skipped(e.to_string()), 0.0, None),
            },
            Scoring::Judge => match &self.judge {
                None => (skipped("no judge configured"), 0.0, None),
                Some((judge, pricing)) => match eval_judge(record, response, judge.as_ref(), *pricing) {
                    Ok((correct, cost)) => (RowResult::Judged { correct }, cost, None),
                    Err(e) => (skipped(e.to_string()), 0.0, None),
                },
            },
            Scoring::FreeForm => match &self.checker {
                None => (skipped("no checker pipeline configured"), 0.0, None),
                Some(ch) => {
                    let system = SystemClock::new();
                    let clock: &dyn Clock = if self.timing { &system } else { &ZeroClock };
                    match eval_freeform(response, &ch.config, &ch.registry, clock) {
                        Ok((r, cost, t)) => (r, cost, Some(t)),
                        Err(e) => (skipped(e.to_string()), 0.0, None),
                    }
                }
            },
        };
        let mut row = EvaluatedRow::new(record, result);
        row.cost_usd = cost;
        row.time_seconds = if self.timing {
            pipeline_time.unwrap_or_else(|| started.elapsed().as_secs_f64())
        } else {
            0.0
        };
        row
    }

    /// Scores every pair; output order follows input order.
    pub fn evaluate(&self, pairs: &[(QuestionRecord, String)]) -> Vec<EvaluatedRow> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs.max(1))
            .build()
            .expect("thread pool");
        pool.install(|| {
            pairs
                .par_iter()
                .map(|(record, response)| self.evaluate_row(record, response))
                .collect()
        })
    }

    pub fn run(&self, model_name: &str, pairs: &[(QuestionRecord, String)]) -> Result<LlmReport, EmptyEvaluationError> {
        aggregate_report(model_name, &self.evaluate(pairs))
    }
}
