//! HTTP text-generation backend and a record/replay cache around any backend.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use factcheck_core::backend::{MockScript, TokenPricing};
use factcheck_core::{BackendError, Generation, GenerationParams, MockBackend, TextGenerationBackend};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::digest::sha256_hex;
use crate::env;
use crate::web::write_atomic;

/// Chat-completions endpoint in the OpenAI wire format.
pub struct ChatCompletionsBackend {
    pub base_url: String,
    pub model: String,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl ChatCompletionsBackend {
    pub const DEFAULT_BASE_URL: &'static str = "https://api.openai.com/v1";
    pub const DEFAULT_MODEL: &'static str = "gpt-4o-mini";

    pub fn new(base_url: impl Into<String>, model: impl Into<String>, api_key: impl Into<String>) -> Self {
        ChatCompletionsBackend {
            base_url: base_url.into(),
            model: model.into(),
            api_key: api_key.into(),
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .expect("http client"),
        }
    }

    /// Configured from the environment; `None` when the key is unset.
    pub fn from_env() -> Option<Self> {
        let key = std::env::var(env::LLM_API_KEY).ok().filter(|k| !k.is_empty())?;
        let base = std::env::var(env::LLM_BASE_URL).unwrap_or_else(|_| Self::DEFAULT_BASE_URL.into());
        let model = std::env::var(env::LLM_MODEL).unwrap_or_else(|_| Self::DEFAULT_MODEL.into());
        Some(Self::new(base, model, key))
    }
}

impl TextGenerationBackend for ChatCompletionsBackend {
    fn name(&self) -> &str {
        &self.model
    }

    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<Generation, BackendError> {
        let err = |m: String| BackendError::new(self.model.clone(), m);
        let mut body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        if let Some(t) = params.max_tokens {
            body["max_tokens"] = t.into();
        }
        if let Some(t) = params.temperature {
            body["temperature"] = t.into();
        }
        let url = format!("{}/chat/completions", self.base_url.trim_end_matches('/'));
        let resp = self
            .client
            .post(url)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| err(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(err(format!("HTTP {status}")));
        }
        let json: Value = resp.json().map_err(|e| err(e.to_string()))?;
        parse_chat_completion(&json).ok_or_else(|| err("response has no message content".into()))
    }
}

pub fn parse_chat_completion(json: &Value) -> Option<Generation> {
    let text = json.pointer("/choices/0/message/content")?.as_str()?.to_string();
    let usage = |k: &str| {
        json.pointer(&format!("/usage/{k}"))
            .and_then(Value::as_u64)
            .unwrap_or(0)
    };
    Some(Generation {
        text,
        tokens_in: usage("prompt_tokens"),
        tokens_out: usage("completion_tokens"),
    })
}

#[derive(Serialize, Deserialize)]
struct Recorded {
    backend: String,
    prompt: String,
    params: GenerationParams,
    generation: Generation,
}

/// Record/replay wrapper: generations are stored on disk keyed by backend
/// name, prompt and params, and served from there on later calls.
pub struct CachedBackend {
    inner: Option<Arc<dyn TextGenerationBackend>>,
    name: String,
    dir: PathBuf,
}

impl CachedBackend {
    pub fn record(inner: Arc<dyn TextGenerationBackend>, dir: impl Into<PathBuf>) -> Self {
        CachedBackend {
            name: inner.name().to_string(),
            inner: Some(inner),
            dir: dir.into(),
        }
    }

    /// Serves only recorded generations; a miss is an error.
    pub fn replay(name: impl Into<String>, dir: impl Into<PathBuf>) -> Self {
        CachedBackend {
            inner: None,
            name: name.into(),
            dir: dir.into(),
        }
    }

    fn path_for(&self, prompt: &str, params: &GenerationParams) -> PathBuf {
        let params = serde_json::to_string(params).unwrap_or_default();
        let key = sha256_hex(format!("{}\n{}\n{}", self.name, params, prompt).as_bytes());
        self.dir.join(format!("{key}.json"))
    }
}

impl TextGenerationBackend for CachedBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<Generation, BackendError> {
        let err = |m: String| BackendError::new(self.name.clone(), m);
        let path = self.path_for(prompt, params);
        if let Ok(bytes) = std::fs::read(&path) {
            let rec: Recorded = serde_json::from_slice(&bytes).map_err(|e| err(format!("corrupt cache entry: {e}")))?;
            return Ok(rec.generation);
        }
        let Some(inner) = &self.inner else {
            return Err(err("no recorded generation for this prompt".into()));
        };
        let generation = inner.generate(prompt, params)?;
        let rec = Recorded {
            backend: self.name.clone(),
            prompt: prompt.to_string(),
            params: params.clone(),
            generation: generation.clone(),
        };
        let write = std::fs::create_dir_all(&self.dir)
            .and_then(|_| serde_json::to_vec_pretty(&rec).map_err(std::io::Error::other))
            .and_then(|bytes| write_atomic(&path, &bytes));
        if let Err(e) = write {
            log::warn!("could not record generation: {e}");
        }
        Ok(generation)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MockLoadError {
    #[error("cannot read {0}: {1}")]
    Io(String, std::io::Error),
    #[error("bad mock script {0}: {1}")]
    Parse(String, serde_json::Error),
}

pub fn load_mock_backend(path: &Path) -> Result<MockBackend, MockLoadError> {
    let shown = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|e| MockLoadError::Io(shown.clone(), e))?;
    let script: MockScript = serde_json::from_slice(&bytes).map_err(|e| MockLoadError::Parse(shown, e))?;
    Ok(MockBackend::new(script))
}

/// Pricing from `OFC_LLM_PRICE_IN` / `OFC_LLM_PRICE_OUT` (USD per 1k tokens).
pub fn pricing_from_env() -> TokenPricing {
    let read = |k: &str| std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(0.0);
    TokenPricing {
        usd_per_1k_input: read("OFC_LLM_PRICE_IN"),
        usd_per_1k_output: read("OFC_LLM_PRICE_OUT"),
    }
}
