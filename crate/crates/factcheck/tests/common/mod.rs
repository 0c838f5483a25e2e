//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use factcheck::core::backend::TokenPricing;
use factcheck::core::bm25::CorpusDocument;
use factcheck::core::text::normalize_query;
use factcheck::core::{EvidenceItem, MockBackend, Registry};
use factcheck::corpus::load_corpus;
use factcheck::llm_backend::load_mock_backend;
use factcheck::registry::SolverSet;
pub mod server;

use factcheck::web::{parse_serper_response, EvidenceCache, ProviderError, SearchProvider, WebSearch};

pub const DOC: &str = "Paris is the capital of France. The Great Wall of China is visible from the Moon.";
pub const CLAIM_PARIS: &str = "Paris is the capital of France.";
pub const CLAIM_WALL: &str = "The Great Wall of China is visible from the Moon.";

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn corpus() -> Vec<CorpusDocument> {
    load_corpus(&fixture("corpus.jsonl")).unwrap()
}

pub fn mock_llm() -> Arc<MockBackend> {
    Arc::new(load_mock_backend(&fixture("mock_llm.json")).unwrap())
}

pub fn serper_payload(name: &str) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(fixture(&format!("search/{name}.json"))).unwrap()).unwrap()
}

/// Search provider that only counts calls and never answers; stands in for
/// the network in replay runs.
#[derive(Default)]
pub struct NoNetwork {
    pub calls: AtomicUsize,
}

impl NoNetwork {
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl SearchProvider for NoNetwork {
    fn name(&self) -> &str {
        "serper"
    }
    fn search(&self, _q: &str, _n: usize, _k: &str) -> Result<Vec<EvidenceItem>, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Err(ProviderError {
            status: None,
            message: "network disabled in tests".into(),
        })
    }
}

/// Serves recorded provider payloads by normalized query.
struct Recorded(BTreeMap<String, Vec<EvidenceItem>>);

impl SearchProvider for Recorded {
    fn name(&self) -> &str {
        "serper"
    }
    fn search(&self, q: &str, _n: usize, _k: &str) -> Result<Vec<EvidenceItem>, ProviderError> {
        self.0.get(q).cloned().ok_or(ProviderError {
            status: Some(404),
            message: format!("no recording for `{q}`"),
        })
    }
}

/// Writes the recorded search payloads for both fixture claims into a cache
/// under `dir`, as a live run would have.
pub fn record_search_cache(dir: &Path) -> EvidenceCache {
    let cache = EvidenceCache::new(dir);
    let recordings = [(CLAIM_PARIS, "paris"), (CLAIM_WALL, "wall")]
        .into_iter()
        .map(|(q, f)| (normalize_query(q), parse_serper_response(&serper_payload(f))))
        .collect();
    let recorder = WebSearch::new(Arc::new(Recorded(recordings)), cache.clone()).with_api_key(Some("recording".into()));
    for q in [CLAIM_PARIS, CLAIM_WALL] {
        recorder.retrieve(q, 100).unwrap();
    }
    cache
}

/// Replay-only search over a recorded cache; the returned provider counts
/// any attempted network call.
pub fn replay_search(dir: &Path) -> (Arc<NoNetwork>, Arc<WebSearch>) {
    let cache = record_search_cache(dir);
    let net = Arc::new(NoNetwork::default());
    let search = WebSearch::new(net.clone(), cache).replay_only(true);
    (net, Arc::new(search))
}

/// Every solver: offline ones over the fixture corpus, replayed web search,
/// and the scripted LLM.
pub fn full_registry(cache_dir: &Path) -> (Registry, Arc<NoNetwork>, Arc<MockBackend>) {
    let (net, search) = replay_search(cache_dir);
    let llm = mock_llm();
    let reg = SolverSet::offline(corpus())
        .with_web(search)
        .with_llm(
            llm.clone(),
            TokenPricing {
                usd_per_1k_input: 0.5,
                usd_per_1k_output: 1.5,
            },
        )
        .build();
    (reg, net, llm)
}

/// Three-stage config text. BM25 keeps 5 passages, web search all 8
/// recorded snippets.
pub fn config_yaml(claims: &str, retriever: &str, verifier: &str, claim_params: &str) -> String {
    let top_k = if retriever == "web_retriever" { 8 } else { 5 };
    let mut yaml = String::from("solvers:\n");
    yaml +=
        &format!("  - name: {claims}\n    stage: claim_processor\n    input_name: document\n    output_name: claims\n");
    yaml += claim_params;
    yaml +=
        &format!("  - name: {retriever}\n    stage: retriever\n    input_name: claims\n    output_name: evidence\n");
    yaml += &format!("    params: {{ top_k: {top_k} }}\n");
    yaml +=
        &format!("  - name: {verifier}\n    stage: verifier\n    input_name: evidence\n    output_name: verdicts\n");
    yaml
}

pub const CLAIM_PROCESSORS: [&str; 2] = ["rule_splitter", "llm_decomposer"];
pub const RETRIEVERS: [&str; 2] = ["bm25_retriever", "web_retriever"];
pub const VERIFIERS: [&str; 2] = ["nli_verifier", "llm_verifier"];

/// Seeded vector of labels.
pub fn seeded_rng(seed: u64) -> rand::rngs::StdRng {
    use rand::SeedableRng;
    rand::rngs::StdRng::seed_from_u64(seed)
}

use factcheck::core::checker::{Dataset, GoldHeader, GoldRecord, Granularity, LabelCounts};
use factcheck::core::llm_eval::{ErrorType, ManifestHeader, QuestionRecord, Subset};
use factcheck::core::Label;

/// Published question counts per subset.
pub const FACTQA_SIZES: [(Subset, usize); 7] = [
    (Subset::Snowballing, 1500),
    (Subset::SelfAware, 3369),
    (Subset::FreshQa, 600),
    (Subset::FacToolQa, 50),
    (Subset::FelmWk, 184),
    (Subset::FactcheckBench, 94),
    (Subset::FactScoreBio, 683),
];
pub const FACTQA_TOTAL: usize = 6480;

/// Published label counts per verification dataset.
pub const FACTBENCH_COUNTS: [(Dataset, LabelCounts); 4] = [
    (Dataset::FacToolQa, LabelCounts::new(177, 56, 0)),
    (Dataset::FelmWk, LabelCounts::new(385, 147, 0)),
    (Dataset::FactcheckBench, LabelCounts::new(472, 159, 47)),
    (Dataset::HaluEval, LabelCounts::new(3692, 815, 0)),
];

pub fn question(id: &str, subset: Subset, domain: &str) -> QuestionRecord {
    QuestionRecord {
        id: id.into(),
        question: format!("Question {id}?"),
        domain: domain.into(),
        topic: "topic".into(),
        ability: "ability".into(),
        task: "task".into(),
        source: "synthetic".into(),
        subset,
        error_types: [ErrorType::Type1].into_iter().collect(),
        gold_answer: (subset == Subset::Snowballing).then(|| "yes".into()),
        answerable: (subset == Subset::SelfAware).then_some(true),
        current_answer: None,
    }
}

/// Records for each `(subset, n)`, ids `<subset>-<i>`, all in one domain.
pub fn factqa_records(sizes: &[(Subset, usize)]) -> Vec<QuestionRecord> {
    sizes
        .iter()
        .flat_map(|&(s, n)| (0..n).map(move |i| question(&format!("{s}-{i}"), s, "History")))
        .collect()
}

pub fn factqa_header(sizes: &[(Subset, usize)], total: Option<usize>) -> ManifestHeader {
    ManifestHeader {
        name: "factqa".into(),
        declared_counts: sizes.iter().copied().collect(),
        total,
    }
}

pub fn gold_record(id: &str, dataset: Dataset, label: Label) -> GoldRecord {
    GoldRecord {
        id: id.into(),
        dataset,
        granularity: if dataset == Dataset::HaluEval {
            Granularity::Document
        } else {
            Granularity::Claim
        },
        text: format!("Statement {id}."),
        label,
    }
}

/// Gold records matching `counts` exactly, ids `<dataset>-<i>`.
pub fn gold_records(counts: &[(Dataset, LabelCounts)]) -> Vec<GoldRecord> {
    let mut out = Vec::new();
    for &(d, c) in counts {
        let labels = std::iter::repeat_n(Label::True, c.n_true)
            .chain(std::iter::repeat_n(Label::False, c.n_false))
            .chain(std::iter::repeat_n(Label::Unknown, c.n_unknown));
        for (i, l) in labels.enumerate() {
            out.push(gold_record(&format!("{d}-{i}"), d, l));
        }
    }
    out
}

pub fn gold_header(counts: &[(Dataset, LabelCounts)]) -> GoldHeader {
    GoldHeader {
        name: "factbench".into(),
        declared_counts: counts.iter().copied().collect(),
    }
}

use factcheck::config::load_pipeline_config;
use factcheck::core::llm_eval::DatasetManifest;
use factcheck::llm_eval::{FreeFormChecker, LlmEvaluator};
use factcheck::registry::{offline_registry, OFFLINE_CONFIG};

/// Offline pipeline over the fixture corpus, for free-form answers.
pub fn offline_checker() -> FreeFormChecker {
    let registry = offline_registry(corpus());
    let config = load_pipeline_config(OFFLINE_CONFIG, &registry).unwrap();
    FreeFormChecker {
        config,
        registry: Arc::new(registry),
    }
}

pub fn mock_judge() -> Arc<MockBackend> {
    Arc::new(load_mock_backend(&fixture("mock_judge.json")).unwrap())
}

pub fn offline_evaluator(jobs: usize) -> LlmEvaluator {
    LlmEvaluator {
        judge: Some((
            mock_judge(),
            TokenPricing {
                usd_per_1k_input: 0.15,
                usd_per_1k_output: 0.6,
            },
        )),
        checker: Some(offline_checker()),
        jobs,
        timing: false,
        ..LlmEvaluator::default()
    }
}

/// One synthetic question with its response and, for short-answer rows,
/// whether the response is right by hand.
pub struct SyntheticRow {
    pub record: QuestionRecord,
    pub response: String,
    pub correct: Option<bool>,
}

fn row(id: &str, subset: Subset, types: &[ErrorType], response: &str, correct: Option<bool>) -> SyntheticRow {
    let mut record = question(id, subset, "History");
    record.error_types = types.iter().copied().collect();
    SyntheticRow {
        record,
        response: response.into(),
        correct,
    }
}

/// Twenty rows over all seven subsets.
pub fn synthetic_rows() -> Vec<SyntheticRow> {
    use ErrorType::*;
    use Subset::*;
    let yes_no = |id: &str, gold: &str, resp: &str, ok: bool, t: &[ErrorType]| {
        let mut r = row(id, Snowballing, t, resp, Some(ok));
        r.record.gold_answer = Some(gold.into());
        r
    };
    let aware = |id: &str, answerable: bool, resp: &str, ok: bool, t: &[ErrorType]| {
        let mut r = row(id, SelfAware, t, resp, Some(ok));
        r.record.answerable = Some(answerable);
        r
    };
    vec![
        yes_no("sb-1", "yes", "Yes, 7919 is prime.", true, &[Type2]),
        yes_no("sb-2", "yes", "No, it has a factor.", false, &[Type2]),
        yes_no("sb-3", "no", "no", true, &[Type2]),
        yes_no("sb-4", "no", "The answer is no, because 91 = 7 x 13.", true, &[Type2]),
        yes_no("sb-5", "yes", "Hard to say without more work.", false, &[Type2]),
        yes_no("sb-6", "no", "Perhaps; it depends.", false, &[Type1, Type2]),
        aware("sa-1", true, "The capital of France is Paris.", true, &[Type1]),
        aware("sa-2", true, "I don't know.", false, &[Type1]),
        aware(
            "sa-3",
            false,
            "Nobody knows what happened before the Big Bang.",
            true,
            &[Type3],
        ),
        aware(
            "sa-4",
            false,
            "It was exactly 4pm on a Tuesday.",
            false,
            &[Type1, Type3],
        ),
        row("fq-1", FreshQa, &[Type3], "RIGHT: the 2024 champion.", Some(true)),
        row("fq-2", FreshQa, &[Type3], "WRONG premise accepted.", Some(false)),
        row("fq-3", FreshQa, &[Type3], "RIGHT again.", Some(true)),
        row(
            "fq-4",
            FreshQa,
            &[Type1, Type3],
            "something the judge cannot grade",
            None,
        ),
        row("ft-1", FacToolQa, &[Type1], DOC, None),
        row("ft-2", FacToolQa, &[Type1], CLAIM_PARIS, None),
        row("fw-1", FelmWk, &[Type1], CLAIM_WALL, None),
        row("fb-1", FactcheckBench, &[Type1, Type2], DOC, None),
        row(
            "fb-2",
            FactcheckBench,
            &[Type2],
            "Quorbly zebrafin marmalade hums.",
            None,
        ),
        row("bio-1", FactScoreBio, &[Type1, Type3], CLAIM_PARIS, None),
    ]
}

pub fn synthetic_manifest(rows: &[SyntheticRow]) -> DatasetManifest {
    let mut counts: BTreeMap<Subset, usize> = BTreeMap::new();
    for r in rows {
        *counts.entry(r.record.subset).or_default() += 1;
    }
    let header = ManifestHeader {
        name: "synthetic".into(),
        declared_counts: counts,
        total: Some(rows.len()),
    };
    DatasetManifest::new(header, rows.iter().map(|r| r.record.clone()).collect()).unwrap()
}

/// `question_id,response` CSV for `rows`.
pub fn responses_csv(rows: &[SyntheticRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["question_id", "response"]).unwrap();
    for r in rows {
        w.write_record([r.record.id.as_str(), r.response.as_str()]).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}
