//! Reference solvers for the three stages.
//!
//! | name            | stage           | reads      | writes    |
//! |-----------------|-----------------|------------|-----------|
//! | `rule_splitter` | claim processor | document   | claims    |
//! | `llm_decomposer`| claim processor | document   | claims    |
//! | `bm25_retriever`| retriever       | claims     | evidence  |
//! | `nli_verifier`  | verifier        | evidence   | verdicts  |
//! | `llm_verifier`  | verifier        | evidence   | verdicts  |
//!
//! The web-search retriever needs HTTP and a disk cache and lives in the std
//! crate.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::backend::{GenerationParams, TextGenerationBackend, TokenPricing};
use crate::bm25::Bm25Index;
use crate::llm::{decompose_claims_llm, verify_llm, DecomposeMode};
use crate::pipeline::{Params, SolverContext, SolverDescriptor, SolverResult, Stage};
use crate::segment::split_claims_rule;
use crate::stance::{verify_nli, LexicalStance, StanceClassifier};
use crate::state::{FactState, StateValue};
use crate::types::{Claim, EvidenceItem, Verdict};
use crate::Solver;

/// Default `top_k` for retrievers.
pub const DEFAULT_TOP_K: usize = 5;

macro_rules! try_solver {
    ($state:ident, $e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return SolverResult::fail($state, e.to_string()),
        }
    };
}

/// Reads `params` overrides of the pricing, if present.
fn pricing(base: TokenPricing, params: &Params) -> Result<TokenPricing, String> {
    Ok(TokenPricing {
        usd_per_1k_input: params.f64_or("usd_per_1k_input", base.usd_per_1k_input)?,
        usd_per_1k_output: params.f64_or("usd_per_1k_output", base.usd_per_1k_output)?,
    })
}

fn generation_params(params: &Params) -> Result<GenerationParams, String> {
    let max_tokens = match params.get("max_tokens") {
        None => None,
        Some(_) => Some(params.usize_or("max_tokens", 0)? as u32),
    };
    let temperature = match params.get("temperature") {
        None => None,
        Some(_) => Some(params.f64_or("temperature", 0.0)?),
    };
    Ok(GenerationParams {
        max_tokens,
        temperature,
    })
}

fn claims_input(state: &FactState, ctx: &SolverContext<'_>) -> Result<Vec<Claim>, String> {
    state
        .claims(ctx.input_name)
        .map(<[Claim]>::to_vec)
        .map_err(|e| e.to_string())
}

/// Claims paired with their evidence, for verifiers whose input is an
/// evidence map.
fn evidence_input(state: &FactState, ctx: &SolverContext<'_>) -> Result<Vec<(Claim, Vec<EvidenceItem>)>, String> {
    let evidence = state.evidence(ctx.input_name).map_err(|e| e.to_string())?;
    let claims = state.resolve_claims(evidence.keys()).map_err(|e| e.to_string())?;
    Ok(claims.into_iter().zip(evidence.values().cloned()).collect())
}

/// Sentence segmentation; one claim per sentence.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleSplitter;

impl Solver for RuleSplitter {
    fn execute(&self, mut state: FactState, ctx: &SolverContext<'_>) -> SolverResult {
        try_solver!(state, ctx.params.only(&[]));
        let document = try_solver!(state, state.document(ctx.input_name).map(ToString::to_string));
        state.insert(ctx.output_name, StateValue::Claims(split_claims_rule(&document)));
        SolverResult::ok(state)
    }
}

/// Decomposition through a text-generation backend. Param `mode` is
/// `sentence` or `document` (default).
pub struct LlmDecomposer {
    pub backend: Arc<dyn TextGenerationBackend>,
    pub pricing: TokenPricing,
}

impl Solver for LlmDecomposer {
    fn execute(&self, mut state: FactState, ctx: &SolverContext<'_>) -> SolverResult {
        try_solver!(
            state,
            ctx.params.only(&[
                "mode",
                "max_tokens",
                "temperature",
                "usd_per_1k_input",
                "usd_per_1k_output"
            ])
        );
        let mode_name = try_solver!(state, ctx.params.str_or("mode", "document"));
        let mode = try_solver!(
            state,
            DecomposeMode::parse(mode_name).ok_or_else(|| format!("unknown mode `{mode_name}`"))
        );
        let price = try_solver!(state, pricing(self.pricing, ctx.params));
        let gen_params = try_solver!(state, generation_params(ctx.params));
        let document = try_solver!(state, state.document(ctx.input_name).map(ToString::to_string));
        let out = try_solver!(
            state,
            decompose_claims_llm(&document, self.backend.as_ref(), mode, &gen_params)
        );
        let cost = out.generations.iter().map(|g| price.cost(g)).sum();
        state.insert(ctx.output_name, StateValue::Claims(out.claims));
        SolverResult::ok_with_cost(state, cost)
    }
}

/// BM25 over an offline corpus. Param `top_k` (default 5, at least 1).
pub struct Bm25Retriever {
    pub index: Arc<Bm25Index>,
}

impl Solver for Bm25Retriever {
    fn execute(&self, mut state: FactState, ctx: &SolverContext<'_>) -> SolverResult {
        try_solver!(state, ctx.params.only(&["top_k"]));
        let top_k = try_solver!(state, ctx.params.usize_or("top_k", DEFAULT_TOP_K));
        if top_k == 0 {
            return SolverResult::fail(state, "param `top_k` must be at least 1");
        }
        let claims = try_solver!(state, claims_input(&state, ctx));
        let evidence: BTreeMap<String, Vec<EvidenceItem>> = claims
            .iter()
            .map(|c| (c.id.clone(), self.index.search(&c.text, top_k)))
            .collect();
        state.insert(ctx.output_name, StateValue::Evidence(evidence));
        SolverResult::ok(state)
    }
}

/// Stance-based verification with majority voting.
pub struct NliVerifier {
    pub classifier: Arc<dyn StanceClassifier>,
}

impl Default for NliVerifier {
    fn default() -> Self {
        NliVerifier {
            classifier: Arc::new(LexicalStance::default()),
        }
    }
}

impl Solver for NliVerifier {
    fn execute(&self, mut state: FactState, ctx: &SolverContext<'_>) -> SolverResult {
        try_solver!(state, ctx.params.only(&[]));
        let pairs = try_solver!(state, evidence_input(&state, ctx));
        let mut verdicts = BTreeMap::new();
        for (claim, evidence) in &pairs {
            let verdict = try_solver!(state, verify_nli(claim, evidence, self.classifier.as_ref()));
            verdicts.insert(claim.id.clone(), verdict);
        }
        state.insert(ctx.output_name, StateValue::Verdicts(verdicts));
        SolverResult::ok(state)
    }
}

/// Verification by prompting a backend once per claim.
pub struct LlmVerifier {
    pub backend: Arc<dyn TextGenerationBackend>,
    pub pricing: TokenPricing,
}

impl Solver for LlmVerifier {
    fn execute(&self, mut state: FactState, ctx: &SolverContext<'_>) -> SolverResult {
        try_solver!(
            state,
            ctx.params
                .only(&["max_tokens", "temperature", "usd_per_1k_input", "usd_per_1k_output"])
        );
        let price = try_solver!(state, pricing(self.pricing, ctx.params));
        let gen_params = try_solver!(state, generation_params(ctx.params));
        let pairs = try_solver!(state, evidence_input(&state, ctx));
        let mut verdicts: BTreeMap<String, Verdict> = BTreeMap::new();
        let mut cost = 0.0;
        for (claim, evidence) in &pairs {
            let (verdict, generation) =
                try_solver!(state, verify_llm(claim, evidence, self.backend.as_ref(), &gen_params));
            cost += price.cost(&generation);
            verdicts.insert(claim.id.clone(), verdict);
        }
        state.insert(ctx.output_name, StateValue::Verdicts(verdicts));
        SolverResult::ok_with_cost(state, cost)
    }
}

pub fn rule_splitter() -> SolverDescriptor {
    SolverDescriptor::new("rule_splitter")
        .stage(Stage::ClaimProcessor)
        .input("document")
        .output("claims")
        .describe("Paragraph and sentence segmentation, one claim per sentence")
        .solver(RuleSplitter)
}

pub fn llm_decomposer(backend: Arc<dyn TextGenerationBackend>, pricing: TokenPricing) -> SolverDescriptor {
    SolverDescriptor::new("llm_decomposer")
        .stage(Stage::ClaimProcessor)
        .input("document")
        .output("claims")
        .describe("Atomic claim extraction with a text-generation backend")
        .solver(LlmDecomposer { backend, pricing })
}

pub fn bm25_retriever(index: Arc<Bm25Index>) -> SolverDescriptor {
    SolverDescriptor::new("bm25_retriever")
        .stage(Stage::Retriever)
        .input("claims")
        .output("evidence")
        .describe("BM25 (k1=1.5, b=0.75) over the offline corpus")
        .solver(Bm25Retriever { index })
}

pub fn nli_verifier(classifier: Arc<dyn StanceClassifier>) -> SolverDescriptor {
    SolverDescriptor::new("nli_verifier")
        .stage(Stage::Verifier)
        .input("evidence")
        .output("verdicts")
        .describe("Per-passage stance, majority vote, stance-to-label mapping")
        .solver(NliVerifier { classifier })
}

pub fn llm_verifier(backend: Arc<dyn TextGenerationBackend>, pricing: TokenPricing) -> SolverDescriptor {
    SolverDescriptor::new("llm_verifier")
        .stage(Stage::Verifier)
        .input("evidence")
        .output("verdicts")
        .describe("Claim + evidence prompt answered with true/false/unknown")
        .solver(LlmVerifier { backend, pricing })
}
