//! Std side of the fact-checking toolkit: file formats, HTTP clients with
//! record/replay caches, evaluators over files, the HTTP service and the CLI.

pub use factcheck_core as core;

pub mod checker_eval;
pub mod cli;
pub mod clock;
pub mod config;
pub mod corpus;
pub mod digest;
pub mod jsonl;
pub mod llm_backend;
pub mod llm_eval;
pub mod registry;
pub mod service;
pub mod store;
pub mod web;

/// Environment variable names for credentials and service settings.
pub mod env {
    pub const LLM_API_KEY: &str = "OFC_LLM_API_KEY";
    pub const SEARCH_API_KEY: &str = "OFC_SEARCH_API_KEY";
    pub const SCRAPER_API_KEY: &str = "OFC_SCRAPER_API_KEY";
    pub const DATA_DIR: &str = "OFC_DATA_DIR";
    pub const PORT: &str = "OFC_PORT";
    pub const LLM_BASE_URL: &str = "OFC_LLM_BASE_URL";
    pub const LLM_MODEL: &str = "OFC_LLM_MODEL";
}
