//! Core of a configurable fact-checking pipeline.
//!
//! A pipeline is an ordered chain of solvers, each belonging to one of three
//! stages (claim processing, evidence retrieval, verification). Solvers pass a
//! shared [`FactState`] along and signal failure with a success flag. This
//! crate also carries the pure parts of the two evaluation harnesses: scoring
//! an LLM's answers on question subsets ([`llm_eval`]) and scoring
//! fact-checkers against gold labels ([`checker`]).
//!
//! Everything here is `no_std` + `alloc`. Clocks, files, HTTP and threads live
//! in the companion `factcheck` crate.

#![no_std]

extern crate alloc;

pub mod backend;
pub mod bm25;
pub mod checker;
pub mod llm;
pub mod llm_eval;
pub mod pipeline;
pub mod response;
pub mod segment;
pub mod solvers;
pub mod stance;
pub mod state;
pub mod text;
pub mod types;

pub use backend::{BackendError, Generation, GenerationParams, MockBackend, TextGenerationBackend};
pub use pipeline::{
    run_pipeline, validate_chain, ChainMismatch, Clock, ParamValue, Params, PipelineConfig, PipelineError,
    RegistrationError, Registry, RunFailure, Solver, SolverContext, SolverDescriptor, SolverResult, SolverSpec, Stage,
    ZeroClock,
};
pub use response::{aggregate_report, evaluate_response, ClaimOutcome, LedgerTotals, ResponseReport};
pub use state::{FactState, LedgerEntry, StateValue};
pub use types::{Claim, EvidenceItem, Label, Span, StanceLabel, UnknownReason, Verdict};
