//! Text-generation backends and cost accounting.

use alloc::string::String;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GenerationParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

/// Backend output plus token usage for the call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generation {
    pub text: String,
    pub tokens_in: u64,
    pub tokens_out: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{backend}: {message}")]
pub struct BackendError {
    pub backend: String,
    pub message: String,
}

impl BackendError {
    pub fn new(backend: impl Into<String>, message: impl Into<String>) -> Self {
        BackendError {
            backend: backend.into(),
            message: message.into(),
        }
    }
}

pub trait TextGenerationBackend: Send + Sync {
    fn name(&self) -> &str;
    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<Generation, BackendError>;
}

/// USD prices per thousand tokens.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TokenPricing {
    pub usd_per_1k_input: f64,
    pub usd_per_1k_output: f64,
}

impl TokenPricing {
    pub fn cost(&self, generation: &Generation) -> f64 {
        (generation.tokens_in as f64 * self.usd_per_1k_input + generation.tokens_out as f64 * self.usd_per_1k_output)
            / 1000.0
    }
}

/// Whitespace word count, the token estimate used by the mock backend.
pub fn approx_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    /// Substring the prompt must contain.
    pub contains: String,
    pub output: String,
}

/// Canned-output script, loadable from JSON.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    #[serde(default)]
    pub rules: Vec<MockRule>,
    #[serde(default)]
    pub default: Option<String>,
    /// When set, every call fails with this message.
    #[serde(default)]
    pub fail_with: Option<String>,
}

/// Deterministic backend mapping prompts to canned outputs. The first rule
/// whose needle occurs in the prompt wins, then the default.
#[derive(Debug, Default)]
pub struct MockBackend {
    script: MockScript,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        MockBackend {
            script,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn constant(output: impl Into<String>) -> Self {
        MockBackend::new(MockScript {
            default: Some(output.into()),
            ..MockScript::default()
        })
    }

    pub fn failing(message: impl Into<String>) -> Self {
        MockBackend::new(MockScript {
            fail_with: Some(message.into()),
            ..MockScript::default()
        })
    }

    pub fn rule(mut self, contains: impl Into<String>, output: impl Into<String>) -> Self {
        self.script.rules.push(MockRule {
            contains: contains.into(),
            output: output.into(),
        });
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl TextGenerationBackend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn generate(&self, prompt: &str, _params: &GenerationParams) -> Result<Generation, BackendError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if let Some(msg) = &self.script.fail_with {
            return Err(BackendError::new("mock", msg.clone()));
        }
        let text = self
            .script
            .rules
            .iter()
            .find(|r| prompt.contains(r.contains.as_str()))
            .map(|r| r.output.clone())
            .or_else(|| self.script.default.clone())
            .ok_or_else(|| BackendError::new("mock", "no canned output matches the prompt"))?;
        Ok(Generation {
            tokens_in: approx_tokens(prompt),
            tokens_out: approx_tokens(&text),
            text,
        })
    }
}

impl<T: TextGenerationBackend + ?Sized> TextGenerationBackend for alloc::sync::Arc<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<Generation, BackendError> {
        (**self).generate(prompt, params)
    }
}
