//! Claim decomposition and claim verification through a text-generation
//! backend, with strict parsing of what comes back.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, Generation, GenerationParams, TextGenerationBackend};
use crate::segment::split_claims_rule;
use crate::types::{Claim, EvidenceItem, Label, Verdict};

pub const DECOMPOSE_SENTENCE_PROMPT: &str = "Decompose the following sentence into atomic, \
self-contained factual claims. Write one claim per line and nothing else.";

pub const DECOMPOSE_DOCUMENT_PROMPT: &str = "Extract context-independent atomic claims from the \
following document. Write one claim per line and nothing else.";

pub const VERIFY_PROMPT: &str = "Based on the evidence and your own knowledge, determine whether \
the claim is true or false. Answer with exactly one word first: true, false, or unknown.";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("could not parse claims from backend output: {0}")]
    DecompositionParse(String),
    #[error("could not parse a verdict from backend output `{0}`")]
    VerdictParse(String),
}

/// Granularity of decomposition prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecomposeMode {
    /// One prompt per rule-segmented sentence.
    Sentence,
    /// One prompt for the whole document.
    Document,
}

impl DecomposeMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sentence" => Some(DecomposeMode::Sentence),
            "document" => Some(DecomposeMode::Document),
            _ => None,
        }
    }
}

pub fn sentence_prompt(sentence: &str) -> String {
    format!("{DECOMPOSE_SENTENCE_PROMPT}\n\nSentence: {sentence}\nClaims:")
}

pub fn document_prompt(document: &str) -> String {
    format!("{DECOMPOSE_DOCUMENT_PROMPT}\n\nDocument: {document}\nClaims:")
}

pub fn verify_prompt(claim: &Claim, evidence: &[EvidenceItem]) -> String {
    let mut prompt = format!("{VERIFY_PROMPT}\n\nClaim: {}\nEvidence:\n", claim.text);
    if evidence.is_empty() {
        prompt.push_str("(none)\n");
    }
    for (i, e) in evidence.iter().enumerate() {
        let _ = writeln!(prompt, "[{}] ({}) {}", i + 1, e.source_id, e.text);
    }
    prompt.push_str("Answer:");
    prompt
}

/// One claim per non-empty line, with list markers (`-`, `*`, `1.`, `2)`)
/// removed.
pub fn parse_claim_lines(output: &str) -> Vec<String> {
    output
        .lines()
        .map(strip_list_marker)
        .filter(|l| !l.is_empty())
        .map(ToString::to_string)
        .collect()
}

fn strip_list_marker(line: &str) -> &str {
    let line = line.trim();
    if let Some(rest) = line
        .strip_prefix("- ")
        .or_else(|| line.strip_prefix("* "))
        .or_else(|| line.strip_prefix("\u{2022} "))
    {
        return rest.trim();
    }
    let digits = line.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(r) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            return r.trim();
        }
    }
    line
}

/// Claims produced by the backend, plus the generations that were paid for.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub claims: Vec<Claim>,
    pub generations: Vec<Generation>,
}

pub fn decompose_claims_llm(
    document: &str,
    backend: &dyn TextGenerationBackend,
    mode: DecomposeMode,
    params: &GenerationParams,
) -> Result<Decomposition, LlmError> {
    let mut claims = Vec::new();
    let mut generations = Vec::new();
    let mut push = |text: String, source: Option<&Claim>| {
        claims.push(Claim {
            id: format!("c{}", claims.len() + 1),
            text,
            source_span: source.and_then(|s| s.source_span),
            context: source.map(|s| s.text.clone()),
        });
    };
    match mode {
        DecomposeMode::Sentence => {
            for sentence in split_claims_rule(document) {
                let generation = backend.generate(&sentence_prompt(&sentence.text), params)?;
                let lines = parse_claim_lines(&generation.text);
                if lines.is_empty() {
                    return Err(LlmError::DecompositionParse(format!(
                        "no claims returned for sentence `{}`",
                        sentence.text
                    )));
                }
                for line in lines {
                    push(line, Some(&sentence));
                }
                generations.push(generation);
            }
        }
        DecomposeMode::Document => {
            if document.trim().is_empty() {
                return Ok(Decomposition { claims, generations });
            }
            let generation = backend.generate(&document_prompt(document), params)?;
            let lines = parse_claim_lines(&generation.text);
            if lines.is_empty() {
                return Err(LlmError::DecompositionParse(
                    "no claims returned for document".to_string(),
                ));
            }
            for line in lines {
                push(line, None);
            }
            generations.push(generation);
        }
    }
    Ok(Decomposition { claims, generations })
}

/// Label from the first whitespace-delimited token, ignoring case and
/// surrounding punctuation. Anything but true/false/unknown is rejected.
pub fn parse_verdict_token(output: &str) -> Option<Label> {
    let first = output.split_whitespace().next()?;
    let word = first.trim_matches(|c: char| !c.is_alphanumeric());
    Label::parse_token(word)
}

pub fn verify_llm(
    claim: &Claim,
    evidence: &[EvidenceItem],
    backend: &dyn TextGenerationBackend,
    params: &GenerationParams,
) -> Result<(Verdict, Generation), LlmError> {
    let generation = backend.generate(&verify_prompt(claim, evidence), params)?;
    let label = parse_verdict_token(&generation.text).ok_or_else(|| LlmError::VerdictParse(generation.text.clone()))?;
    let support = match label {
        Label::Unknown => Vec::new(),
        _ => evidence.iter().map(|e| e.source_id.clone()).collect(),
    };
    Ok((Verdict::from_label(label, support), generation))
}
