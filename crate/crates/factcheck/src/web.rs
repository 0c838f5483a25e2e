//! Web-search retrieval with an on-disk record/replay cache.
//!
//! Each normalized query maps to one cache file holding a JSON array of
//! [`EvidenceItem`]. A cache hit never touches the network and needs no
//! credential.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use factcheck_core::pipeline::{SolverContext, SolverDescriptor, SolverResult, Stage};
use factcheck_core::solvers::DEFAULT_TOP_K;
use factcheck_core::text::normalize_query;
use factcheck_core::{EvidenceItem, FactState, Solver, StateValue};
use rayon::prelude::*;
use serde_json::Value;

use crate::digest::sha256_hex;
use crate::env;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{message}")]
pub struct ProviderError {
    pub status: Option<u16>,
    pub message: String,
}

/// A search API returning snippets for a query.
pub trait SearchProvider: Send + Sync {
    /// Stable name, part of the cache key.
    fn name(&self) -> &str;
    fn search(&self, query: &str, num: usize, api_key: &str) -> Result<Vec<EvidenceItem>, ProviderError>;
}

/// Google-results API in the Serper wire format.
pub struct SerperProvider {
    pub endpoint: String,
    client: reqwest::blocking::Client,
}

impl SerperProvider {
    pub const DEFAULT_ENDPOINT: &'static str = "https://google.serper.dev/search";

    pub fn new(endpoint: impl Into<String>) -> Self {
        SerperProvider {
            endpoint: endpoint.into(),
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(30))
                .build()
                .expect("http client"),
        }
    }
}

impl Default for SerperProvider {
    fn default() -> Self {
        Self::new(Self::DEFAULT_ENDPOINT)
    }
}

impl SearchProvider for SerperProvider {
    fn name(&self) -> &str {
        "serper"
    }

    fn search(&self, query: &str, num: usize, api_key: &str) -> Result<Vec<EvidenceItem>, ProviderError> {
        let resp = self
            .client
            .post(&self.endpoint)
            .header("X-API-KEY", api_key)
            .json(&serde_json::json!({ "q": query, "num": num }))
            .send()
            .map_err(|e| ProviderError {
                status: None,
                message: e.to_string(),
            })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(ProviderError {
                status: Some(status.as_u16()),
                message: format!("HTTP {status}"),
            });
        }
        let body: Value = resp.json().map_err(|e| ProviderError {
            status: Some(status.as_u16()),
            message: format!("bad response body: {e}"),
        })?;
        Ok(parse_serper_response(&body))
    }
}

/// Organic results as evidence. Score is `1 / position`.
pub fn parse_serper_response(body: &Value) -> Vec<EvidenceItem> {
    let Some(organic) = body.get("organic").and_then(Value::as_array) else {
        return Vec::new();
    };
    organic
        .iter()
        .enumerate()
        .filter_map(|(i, item)| {
            let snippet = item.get("snippet")?.as_str()?.trim();
            if snippet.is_empty() {
                return None;
            }
            let link = item.get("link").and_then(Value::as_str).unwrap_or_default();
            let position = item
                .get("position")
                .and_then(Value::as_f64)
                .filter(|p| *p >= 1.0)
                .unwrap_or((i + 1) as f64);
            Some(EvidenceItem {
                text: snippet.to_string(),
                source_id: link.to_string(),
                score: 1.0 / position,
            })
        })
        .collect()
}

/// One JSON file per (provider, normalized query).
#[derive(Debug, Clone)]
pub struct EvidenceCache {
    dir: PathBuf,
}

impl EvidenceCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        EvidenceCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, provider: &str, normalized_query: &str) -> PathBuf {
        let key = sha256_hex(format!("{provider}\n{normalized_query}").as_bytes());
        self.dir.join(provider).join(format!("{key}.json"))
    }

    pub fn get(&self, provider: &str, normalized_query: &str) -> std::io::Result<Option<Vec<EvidenceItem>>> {
        match std::fs::read(self.path_for(provider, normalized_query)) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn put(&self, provider: &str, normalized_query: &str, items: &[EvidenceItem]) -> std::io::Result<()> {
        let path = self.path_for(provider, normalized_query);
        let parent = path.parent().expect("cache path has a parent");
        std::fs::create_dir_all(parent)?;
        let bytes = serde_json::to_vec_pretty(items).map_err(std::io::Error::other)?;
        write_atomic(&path, &bytes)
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension(format!("tmp.{}", uuid::Uuid::new_v4().simple()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    /// Delay before the second attempt; doubles after each failure.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WebError {
    #[error("credential {var} is not set")]
    Credential { var: &'static str },
    #[error("search for `{query}` failed after {} attempts: {}", attempts.len(), attempts.join("; "))]
    Retrieval { query: String, attempts: Vec<String> },
    #[error("no cached result for `{0}` and live search is disabled")]
    ReplayMiss(String),
    #[error("evidence cache: {0}")]
    Cache(String),
}

/// Cached, retrying search client.
pub struct WebSearch {
    pub provider: Arc<dyn SearchProvider>,
    pub cache: EvidenceCache,
    pub api_key: Option<String>,
    pub retry: RetryPolicy,
    /// Fail on a cache miss instead of calling the provider.
    pub replay_only: bool,
}

impl WebSearch {
    pub fn new(provider: Arc<dyn SearchProvider>, cache: EvidenceCache) -> Self {
        WebSearch {
            provider,
            cache,
            api_key: None,
            retry: RetryPolicy::default(),
            replay_only: false,
        }
    }

    /// Takes the key from the search credential variable, when set.
    pub fn with_env_key(mut self) -> Self {
        self.api_key = std::env::var(env::SEARCH_API_KEY).ok().filter(|k| !k.is_empty());
        self
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn replay_only(mut self, on: bool) -> Self {
        self.replay_only = on;
        self
    }

    /// Up to `top_k` evidence items for `query`.
    pub fn retrieve(&self, query: &str, top_k: usize) -> Result<Vec<EvidenceItem>, WebError> {
        let provider = self.provider.name();
        let normalized = normalize_query(query);
        let cached = self
            .cache
            .get(provider, &normalized)
            .map_err(|e| WebError::Cache(e.to_string()))?;
        let mut items = match cached {
            Some(items) => items,
            None => {
                if self.replay_only {
                    return Err(WebError::ReplayMiss(normalized));
                }
                let key = self.api_key.as_deref().ok_or(WebError::Credential {
                    var: env::SEARCH_API_KEY,
                })?;
                let items = self.fetch(&normalized, top_k, key)?;
                self.cache
                    .put(provider, &normalized, &items)
                    .map_err(|e| WebError::Cache(e.to_string()))?;
                items
            }
        };
        items.truncate(top_k);
        Ok(items)
    }

    fn fetch(&self, query: &str, top_k: usize, key: &str) -> Result<Vec<EvidenceItem>, WebError> {
        let mut log = Vec::new();
        let mut delay = self.retry.base_delay;
        for attempt in 1..=self.retry.attempts.max(1) {
            match self.provider.search(query, top_k, key) {
                Ok(items) => return Ok(items),
                Err(e) => {
                    log::warn!("search attempt {attempt} for `{query}` failed: {e}");
                    log.push(format!("attempt {attempt}: {e}"));
                }
            }
            if attempt < self.retry.attempts {
                std::thread::sleep(delay);
                delay *= 2;
            }
        }
        Err(WebError::Retrieval {
            query: query.to_string(),
            attempts: log,
        })
    }
}

/// Retriever solver over [`WebSearch`]. Param `top_k` (default 5). Claims
/// are searched concurrently.
pub struct WebRetriever {
    pub search: Arc<WebSearch>,
}

impl Solver for WebRetriever {
    fn execute(&self, mut state: FactState, ctx: &SolverContext<'_>) -> SolverResult {
        if let Err(e) = ctx.params.only(&["top_k"]) {
            return SolverResult::fail(state, e);
        }
        let top_k = match ctx.params.usize_or("top_k", DEFAULT_TOP_K) {
            Ok(0) => return SolverResult::fail(state, "param `top_k` must be at least 1"),
            Ok(k) => k,
            Err(e) => return SolverResult::fail(state, e),
        };
        let claims = match state.claims(ctx.input_name) {
            Ok(c) => c.to_vec(),
            Err(e) => return SolverResult::fail(state, e.to_string()),
        };
        let found: Result<BTreeMap<String, Vec<EvidenceItem>>, WebError> = claims
            .par_iter()
            .map(|c| Ok((c.id.clone(), self.search.retrieve(&c.text, top_k)?)))
            .collect();
        match found {
            Ok(evidence) => {
                state.insert(ctx.output_name, StateValue::Evidence(evidence));
                SolverResult::ok(state)
            }
            Err(e) => SolverResult::fail(state, e.to_string()),
        }
    }
}

pub fn web_retriever(search: Arc<WebSearch>) -> SolverDescriptor {
    SolverDescriptor::new("web_retriever")
        .stage(Stage::Retriever)
        .input("claims")
        .output("evidence")
        .describe("Web search snippets through a record/replay cache")
        .solver(WebRetriever { search })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Scripted {
        calls: AtomicUsize,
        fail_first: usize,
    }

    impl SearchProvider for Scripted {
        fn name(&self) -> &str {
            "scripted"
        }
        fn search(&self, query: &str, _num: usize, _key: &str) -> Result<Vec<EvidenceItem>, ProviderError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                return Err(ProviderError {
                    status: Some(500),
                    message: "HTTP 500 Internal Server Error".into(),
                });
            }
            Ok(vec![EvidenceItem {
                text: format!("about {query}"),
                source_id: "https://example.org/a".into(),
                score: 1.0,
            }])
        }
    }

    fn client(dir: &Path, fail_first: usize) -> (Arc<Scripted>, WebSearch) {
        let p = Arc::new(Scripted {
            calls: AtomicUsize::new(0),
            fail_first,
        });
        let search = WebSearch::new(p.clone(), EvidenceCache::new(dir))
            .with_api_key(Some("k".into()))
            .with_retry(RetryPolicy {
                attempts: 3,
                base_delay: Duration::ZERO,
            });
        (p, search)
    }

    #[test]
    fn second_call_hits_cache_with_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let (p, search) = client(dir.path(), 0);
        let a = search.retrieve("Is Paris  in France?", 5).unwrap();
        let b = search.retrieve("is paris in france", 5).unwrap();
        assert_eq!(p.calls.load(Ordering::SeqCst), 1);
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
    }

    #[test]
    fn missing_credential_only_matters_on_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let (_, search) = client(dir.path(), 0);
        search.retrieve("q", 5).unwrap();
        let keyless = search.with_api_key(None);
        assert!(keyless.retrieve("q", 5).is_ok());
        assert_eq!(
            keyless.retrieve("other", 5),
            Err(WebError::Credential {
                var: "OFC_SEARCH_API_KEY"
            })
        );
    }

    #[test]
    fn three_server_errors_give_retrieval_error_with_log() {
        let dir = tempfile::tempdir().unwrap();
        let (p, search) = client(dir.path(), 3);
        match search.retrieve("q", 5) {
            Err(WebError::Retrieval { attempts, .. }) => {
                assert_eq!(attempts.len(), 3);
                assert!(attempts[2].starts_with("attempt 3: HTTP 500"));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(p.calls.load(Ordering::SeqCst), 3);
        assert!(search.cache.get("scripted", "q").unwrap().is_none());
    }

    #[test]
    fn recovers_on_third_attempt() {
        let dir = tempfile::tempdir().unwrap();
        let (p, search) = client(dir.path(), 2);
        assert_eq!(search.retrieve("q", 5).unwrap().len(), 1);
        assert_eq!(p.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn replay_only_refuses_misses() {
        let dir = tempfile::tempdir().unwrap();
        let (p, search) = client(dir.path(), 0);
        let search = search.replay_only(true);
        assert!(matches!(search.retrieve("q", 5), Err(WebError::ReplayMiss(_))));
        assert_eq!(p.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn serper_parsing() {
        let body = serde_json::json!({
            "organic": [
                {"title": "t", "link": "https://a", "snippet": "first", "position": 1},
                {"title": "t", "link": "https://b", "snippet": "  "},
                {"title": "t", "link": "https://c", "snippet": "third", "position": 4}
            ]
        });
        let items = parse_serper_response(&body);
        assert_eq!(items.len(), 2);
        assert_eq!(items[0].source_id, "https://a");
        assert_eq!(items[1].score, 0.25);
        assert!(parse_serper_response(&serde_json::json!({})).is_empty());
    }
}
