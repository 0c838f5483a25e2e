//! Solver registry, pipeline configuration and the sequential executor.
//!
//! A solver reads the value named by its `input_name`, writes `output_name`,
//! and reports success through [`SolverResult::success`]. Adjacent solvers
//! must agree on names: `solvers[i].output_name == solvers[i + 1].input_name`.
//! The executor never renames values to make a chain fit.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::state::{FactState, LedgerEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    ClaimProcessor,
    Retriever,
    Verifier,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::ClaimProcessor, Stage::Retriever, Stage::Verifier];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::ClaimProcessor => "claim_processor",
            Stage::Retriever => "retriever",
            Stage::Verifier => "verifier",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.as_str() == s)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scalar solver setting. The engine never interprets these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Str(s) => f.write_str(s),
        }
    }
}

/// Opaque key -> scalar settings, validated by each solver.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Params(pub BTreeMap<String, ParamValue>);

impl Params {
    pub fn new() -> Self {
        Params::default()
    }

    pub fn with(mut self, key: &str, value: ParamValue) -> Self {
        self.0.insert(key.to_string(), value);
        self
    }

    pub fn get(&self, key: &str) -> Option<&ParamValue> {
        self.0.get(key)
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, String> {
        match self.0.get(key) {
            None => Ok(default),
            Some(ParamValue::Int(i)) if *i >= 0 => Ok(*i as usize),
            Some(other) => Err(format!("param `{key}` must be a non-negative integer, got `{other}`")),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, String> {
        match self.0.get(key) {
            None => Ok(default),
            Some(ParamValue::Int(i)) => Ok(*i as f64),
            Some(ParamValue::Float(x)) if x.is_finite() => Ok(*x),
            Some(other) => Err(format!("param `{key}` must be a number, got `{other}`")),
        }
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> Result<&'a str, String> {
        match self.0.get(key) {
            None => Ok(default),
            Some(ParamValue::Str(s)) => Ok(s),
            Some(other) => Err(format!("param `{key}` must be a string, got `{other}`")),
        }
    }

    /// Rejects keys outside `allowed`.
    pub fn only(&self, allowed: &[&str]) -> Result<(), String> {
        match self.0.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(format!("unknown param `{k}`")),
            None => Ok(()),
        }
    }
}

/// Names and settings one solver runs with.
pub struct SolverContext<'a> {
    pub name: &'a str,
    pub stage: Stage,
    pub input_name: &'a str,
    pub output_name: &'a str,
    pub params: &'a Params,
}

/// State returned by a solver together with its success flag.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub success: bool,
    pub state: FactState,
    pub error_message: Option<String>,
    /// Provider cost attributed to this call, in USD.
    pub cost_usd: f64,
}

impl SolverResult {
    pub fn ok(state: FactState) -> Self {
        SolverResult {
            success: true,
            state,
            error_message: None,
            cost_usd: 0.0,
        }
    }

    pub fn ok_with_cost(state: FactState, cost_usd: f64) -> Self {
        SolverResult {
            cost_usd,
            ..SolverResult::ok(state)
        }
    }

    pub fn fail(state: FactState, message: impl Into<String>) -> Self {
        SolverResult {
            success: false,
            state,
            error_message: Some(message.into()),
            cost_usd: 0.0,
        }
    }
}

/// A pipeline stage implementation.
///
/// Implementations own whatever resources they need (corpus, backend, cache)
/// and must be callable from several runs at once.
pub trait Solver: Send + Sync {
    fn execute(&self, state: FactState, ctx: &SolverContext<'_>) -> SolverResult;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistrationError {
    #[error("solver descriptor is missing `{0}`")]
    MissingField(&'static str),
    #[error("solver name must be non-empty")]
    EmptyName,
}

/// Builder-style description of a solver to register.
#[derive(Clone, Default)]
pub struct SolverDescriptor {
    pub name: String,
    pub stage: Option<Stage>,
    pub input_name: Option<String>,
    pub output_name: Option<String>,
    pub description: String,
    pub solver: Option<Arc<dyn Solver>>,
}

impl SolverDescriptor {
    pub fn new(name: impl Into<String>) -> Self {
        SolverDescriptor {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn stage(mut self, stage: Stage) -> Self {
        self.stage = Some(stage);
        self
    }

    pub fn input(mut self, name: impl Into<String>) -> Self {
        self.input_name = Some(name.into());
        self
    }

    pub fn output(mut self, name: impl Into<String>) -> Self {
        self.output_name = Some(name.into());
        self
    }

    pub fn describe(mut self, text: impl Into<String>) -> Self {
        self.description = text.into();
        self
    }

    pub fn solver(mut self, solver: impl Solver + 'static) -> Self {
        self.solver = Some(Arc::new(solver));
        self
    }

    pub fn shared(mut self, solver: Arc<dyn Solver>) -> Self {
        self.solver = Some(solver);
        self
    }
}

/// A validated registry entry.
#[derive(Clone)]
pub struct RegisteredSolver {
    pub name: String,
    pub stage: Stage,
    pub input_name: String,
    pub output_name: String,
    pub description: String,
    pub solver: Arc<dyn Solver>,
}

impl fmt::Debug for RegisteredSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RegisteredSolver")
            .field("name", &self.name)
            .field("stage", &self.stage)
            .field("input_name", &self.input_name)
            .field("output_name", &self.output_name)
            .finish_non_exhaustive()
    }
}

/// Summary of a registered solver, as listed to clients.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverInfo {
    pub name: String,
    pub stage: Stage,
    pub input_name: String,
    pub output_name: String,
    pub description: String,
}

/// Name -> solver map. Populated at startup, then shared read-only.
#[derive(Clone, Default, Debug)]
pub struct Registry {
    solvers: BTreeMap<String, RegisteredSolver>,
}

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    /// Registers `descriptor`, returning the entry it replaced, if any.
    pub fn register(&mut self, descriptor: SolverDescriptor) -> Result<Option<RegisteredSolver>, RegistrationError> {
        if descriptor.name.trim().is_empty() {
            return Err(RegistrationError::EmptyName);
        }
        let stage = descriptor.stage.ok_or(RegistrationError::MissingField("stage"))?;
        let input_name = descriptor
            .input_name
            .filter(|s| !s.is_empty())
            .ok_or(RegistrationError::MissingField("input_name"))?;
        let output_name = descriptor
            .output_name
            .filter(|s| !s.is_empty())
            .ok_or(RegistrationError::MissingField("output_name"))?;
        let solver = descriptor.solver.ok_or(RegistrationError::MissingField("solver"))?;
        let entry = RegisteredSolver {
            name: descriptor.name.clone(),
            stage,
            input_name,
            output_name,
            description: descriptor.description,
            solver,
        };
        let previous = self.solvers.insert(descriptor.name.clone(), entry);
        if previous.is_some() {
            log::warn!("solver `{}` re-registered; previous entry replaced", descriptor.name);
        }
        Ok(previous)
    }

    pub fn get(&self, name: &str) -> Option<&RegisteredSolver> {
        self.solvers.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.solvers.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.solvers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solvers.is_empty()
    }

    pub fn list(&self) -> Vec<SolverInfo> {
        self.solvers
            .values()
            .map(|s| SolverInfo {
                name: s.name.clone(),
                stage: s.stage,
                input_name: s.input_name.clone(),
                output_name: s.output_name.clone(),
                description: s.description.clone(),
            })
            .collect()
    }
}

/// One configured pipeline step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSpec {
    pub name: String,
    pub stage: Stage,
    pub input_name: String,
    pub output_name: String,
    #[serde(default, skip_serializing_if = "params_empty")]
    pub params: Params,
}

fn params_empty(p: &Params) -> bool {
    p.0.is_empty()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub solvers: Vec<SolverSpec>,
    #[serde(default)]
    pub start_index: usize,
}

/// Config as written by users: stage and names may be omitted and are then
/// taken from the registry entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPipelineConfig {
    pub solvers: Vec<RawSolverSpec>,
    #[serde(default)]
    pub start_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSolverSpec {
    pub name: String,
    #[serde(default)]
    pub stage: Option<Stage>,
    #[serde(default)]
    pub input_name: Option<String>,
    #[serde(default)]
    pub output_name: Option<String>,
    #[serde(default)]
    pub params: Option<Params>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("unknown solver `{0}`")]
    UnknownSolver(String),
}

impl ConfigError {
    fn parse(msg: impl Into<String>) -> Self {
        ConfigError::Parse(msg.into())
    }
}

impl PipelineConfig {
    /// Resolves a user config against the registry, in file order.
    pub fn resolve(raw: RawPipelineConfig, registry: &Registry) -> Result<Self, ConfigError> {
        if raw.solvers.is_empty() {
            return Err(ConfigError::parse("pipeline must have at least one solver"));
        }
        let mut solvers = Vec::with_capacity(raw.solvers.len());
        for spec in raw.solvers {
            if solvers.iter().any(|s: &SolverSpec| s.name == spec.name) {
                return Err(ConfigError::parse(format!("solver `{}` listed twice", spec.name)));
            }
            let entry = registry
                .get(&spec.name)
                .ok_or_else(|| ConfigError::UnknownSolver(spec.name.clone()))?;
            if let Some(stage) = spec.stage {
                if stage != entry.stage {
                    return Err(ConfigError::parse(format!(
                        "solver `{}` is a {}, config says {}",
                        spec.name, entry.stage, stage
                    )));
                }
            }
            solvers.push(SolverSpec {
                name: spec.name,
                stage: entry.stage,
                input_name: spec.input_name.unwrap_or_else(|| entry.input_name.clone()),
                output_name: spec.output_name.unwrap_or_else(|| entry.output_name.clone()),
                params: spec.params.unwrap_or_default(),
            });
        }
        let start_index = raw.start_index.unwrap_or(0);
        if start_index >= solvers.len() {
            return Err(ConfigError::parse(format!(
                "start_index {start_index} out of range for {} solvers",
                solvers.len()
            )));
        }
        Ok(PipelineConfig { solvers, start_index })
    }

    pub fn len(&self) -> usize {
        self.solvers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solvers.is_empty()
    }

    /// Index of the first solver of `stage`.
    pub fn position_of(&self, stage: Stage) -> Option<usize> {
        self.solvers.iter().position(|s| s.stage == stage)
    }

    pub fn starting_at(&self, index: usize) -> Self {
        PipelineConfig {
            solvers: self.solvers.clone(),
            start_index: index,
        }
    }
}

/// First boundary where `solvers[position - 1].output_name` differs from
/// `solvers[position].input_name`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("chain mismatch between solvers {} and {}", .position - 1, .position)]
pub struct ChainMismatch {
    pub position: usize,
}

pub fn validate_chain(config: &PipelineConfig) -> Result<(), ChainMismatch> {
    match config
        .solvers
        .windows(2)
        .position(|pair| pair[0].output_name != pair[1].input_name)
    {
        Some(i) => Err(ChainMismatch { position: i + 1 }),
        None => Ok(()),
    }
}

/// Monotonic time source, in seconds.
pub trait Clock {
    fn now_seconds(&self) -> f64;
}

/// Always reads zero, for byte-reproducible ledgers.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroClock;

impl Clock for ZeroClock {
    fn now_seconds(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    ChainMismatch(#[from] ChainMismatch),
    #[error("start_index {start} out of range for {len} solvers")]
    StartIndexOutOfRange { start: usize, len: usize },
    #[error("unknown solver `{0}`")]
    UnknownSolver(String),
    #[error("state has no value named `{name}` required by solver `{solver}`")]
    MissingInput { name: String, solver: String },
    #[error("solver `{name}` ({stage}) failed: {message}")]
    SolverFailure {
        name: String,
        stage: Stage,
        message: String,
    },
}

/// A failed run: the error plus the state as it stood when execution stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub error: PipelineError,
    pub state: FactState,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

impl core::error::Error for RunFailure {}

/// Executes `config.solvers[config.start_index..]` in order over `state`.
///
/// Each executed solver, including a failing one, appends exactly one ledger
/// entry. Execution stops at the first unsuccessful solver.
pub fn run_pipeline(
    state: FactState,
    config: &PipelineConfig,
    registry: &Registry,
    clock: &dyn Clock,
) -> Result<FactState, RunFailure> {
    let fail = |error, state| Err(RunFailure { error, state });
    if let Err(e) = validate_chain(config) {
        return fail(e.into(), state);
    }
    let start = config.start_index;
    if start >= config.solvers.len() {
        return fail(
            PipelineError::StartIndexOutOfRange {
                start,
                len: config.solvers.len(),
            },
            state,
        );
    }
    let first = &config.solvers[start];
    if !state.contains(&first.input_name) {
        return fail(
            PipelineError::MissingInput {
                name: first.input_name.clone(),
                solver: first.name.clone(),
            },
            state,
        );
    }
    // resolve everything up front so an unknown name fails before any work
    let mut resolved = Vec::with_capacity(config.solvers.len() - start);
    for spec in &config.solvers[start..] {
        match registry.get(&spec.name) {
            Some(entry) => resolved.push((spec, entry)),
            None => return fail(PipelineError::UnknownSolver(spec.name.clone()), state),
        }
    }

    let mut state = state;
    for (spec, entry) in resolved {
        let ctx = SolverContext {
            name: &spec.name,
            stage: spec.stage,
            input_name: &spec.input_name,
            output_name: &spec.output_name,
            params: &spec.params,
        };
        let started = clock.now_seconds();
        let result = entry.solver.execute(state, &ctx);
        let elapsed = (clock.now_seconds() - started).max(0.0);
        state = result.state;
        state.ledger.push(LedgerEntry {
            solver: spec.name.clone(),
            stage: spec.stage,
            wall_time_seconds: elapsed,
            cost_usd: if result.cost_usd.is_finite() {
                result.cost_usd.max(0.0)
            } else {
                0.0
            },
        });
        let message = if !result.success {
            Some(
                result
                    .error_message
                    .unwrap_or_else(|| "solver reported failure without a message".to_string()),
            )
        } else if !state.contains(&spec.output_name) {
            Some(format!("solver did not produce `{}`", spec.output_name))
        } else {
            None
        };
        if let Some(message) = message {
            return fail(
                PipelineError::SolverFailure {
                    name: spec.name.clone(),
                    stage: spec.stage,
                    message,
                },
                state,
            );
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::StateValue;
    use crate::types::Claim;
    use alloc::vec;

    struct Copier;

    impl Solver for Copier {
        fn execute(&self, mut state: FactState, ctx: &SolverContext<'_>) -> SolverResult {
            match state.get(ctx.input_name).cloned() {
                Some(v) => {
                    state.insert(ctx.output_name, v);
                    SolverResult::ok(state)
                }
                None => SolverResult::fail(state, "no input"),
            }
        }
    }

    struct Failing;

    impl Solver for Failing {
        fn execute(&self, state: FactState, _: &SolverContext<'_>) -> SolverResult {
            SolverResult::fail(state, "backend exploded")
        }
    }

    fn spec(name: &str, stage: Stage, input: &str, output: &str) -> SolverSpec {
        SolverSpec {
            name: name.to_string(),
            stage,
            input_name: input.to_string(),
            output_name: output.to_string(),
            params: Params::new(),
        }
    }

    fn registry() -> Registry {
        let mut reg = Registry::new();
        for (name, stage, i, o) in [
            ("split", Stage::ClaimProcessor, "document", "claims"),
            ("fetch", Stage::Retriever, "claims", "evidence"),
            ("judge", Stage::Verifier, "evidence", "verdicts"),
        ] {
            reg.register(
                SolverDescriptor::new(name)
                    .stage(stage)
                    .input(i)
                    .output(o)
                    .solver(Copier),
            )
            .unwrap();
        }
        reg.register(
            SolverDescriptor::new("broken")
                .stage(Stage::Retriever)
                .input("claims")
                .output("evidence")
                .solver(Failing),
        )
        .unwrap();
        reg
    }

    #[test]
    fn registered_solver_resolves_by_name() {
        let reg = registry();
        let entry = reg.get("split").unwrap();
        assert_eq!(entry.stage, Stage::ClaimProcessor);
        assert_eq!(reg.list().len(), 4);
    }

    #[test]
    fn re_registration_replaces() {
        let mut reg = registry();
        let previous = reg
            .register(
                SolverDescriptor::new("split")
                    .stage(Stage::ClaimProcessor)
                    .input("document")
                    .output("atoms")
                    .solver(Copier),
            )
            .unwrap();
        assert_eq!(previous.unwrap().output_name, "claims");
        assert_eq!(reg.get("split").unwrap().output_name, "atoms");
    }

    #[test]
    fn malformed_descriptor_is_rejected() {
        let mut reg = Registry::new();
        let missing_output = SolverDescriptor::new("x")
            .stage(Stage::Verifier)
            .input("evidence")
            .solver(Copier);
        assert_eq!(
            reg.register(missing_output).unwrap_err(),
            RegistrationError::MissingField("output_name")
        );
        let missing_stage = SolverDescriptor::new("x").input("a").output("b").solver(Copier);
        assert_eq!(
            reg.register(missing_stage).unwrap_err(),
            RegistrationError::MissingField("stage")
        );
        assert!(reg.is_empty());
    }

    #[test]
    fn chain_validation_reports_first_bad_boundary() {
        let ok = PipelineConfig {
            solvers: vec![
                spec("split", Stage::ClaimProcessor, "document", "claims"),
                spec("fetch", Stage::Retriever, "claims", "evidence"),
            ],
            start_index: 0,
        };
        assert_eq!(validate_chain(&ok), Ok(()));

        let bad = PipelineConfig {
            solvers: vec![
                spec("split", Stage::ClaimProcessor, "document", "claims"),
                spec("judge", Stage::Verifier, "evidence", "verdicts"),
            ],
            start_index: 0,
        };
        assert_eq!(validate_chain(&bad), Err(ChainMismatch { position: 1 }));

        let single = PipelineConfig {
            solvers: vec![spec("judge", Stage::Verifier, "x", "y")],
            start_index: 0,
        };
        assert_eq!(validate_chain(&single), Ok(()));
    }

    #[test]
    fn resolve_fills_defaults_and_rejects_unknowns() {
        let reg = registry();
        let raw = RawPipelineConfig {
            solvers: vec![
                RawSolverSpec {
                    name: "split".to_string(),
                    stage: None,
                    input_name: None,
                    output_name: None,
                    params: None,
                },
                RawSolverSpec {
                    name: "fetch".to_string(),
                    stage: Some(Stage::Retriever),
                    input_name: Some("claims".to_string()),
                    output_name: Some("evidence".to_string()),
                    params: Some(Params::new().with("top_k", ParamValue::Int(5))),
                },
            ],
            start_index: None,
        };
        let cfg = PipelineConfig::resolve(raw.clone(), &reg).unwrap();
        assert_eq!(cfg.solvers[0].output_name, "claims");
        assert_eq!(cfg.solvers[1].params.usize_or("top_k", 1), Ok(5));

        let mut unknown = raw.clone();
        unknown.solvers[0].name = "does_not_exist".to_string();
        assert_eq!(
            PipelineConfig::resolve(unknown, &reg),
            Err(ConfigError::UnknownSolver("does_not_exist".to_string()))
        );

        let empty = RawPipelineConfig {
            solvers: vec![],
            start_index: None,
        };
        assert!(matches!(
            PipelineConfig::resolve(empty, &reg),
            Err(ConfigError::Parse(_))
        ));

        let mut wrong_stage = raw.clone();
        wrong_stage.solvers[0].stage = Some(Stage::Verifier);
        assert!(matches!(
            PipelineConfig::resolve(wrong_stage, &reg),
            Err(ConfigError::Parse(_))
        ));

        let mut past_end = raw;
        past_end.start_index = Some(2);
        assert!(matches!(
            PipelineConfig::resolve(past_end, &reg),
            Err(ConfigError::Parse(_))
        ));
    }

    fn three_stage() -> PipelineConfig {
        PipelineConfig {
            solvers: vec![
                spec("split", Stage::ClaimProcessor, "document", "claims"),
                spec("fetch", Stage::Retriever, "claims", "evidence"),
                spec("judge", Stage::Verifier, "evidence", "verdicts"),
            ],
            start_index: 0,
        }
    }

    #[test]
    fn full_run_records_one_ledger_entry_per_solver() {
        let reg = registry();
        let out = run_pipeline(FactState::from_document("x"), &three_stage(), &reg, &ZeroClock).unwrap();
        assert_eq!(out.ledger.len(), 3);
        assert!(out.contains("verdicts"));
    }

    #[test]
    fn start_index_requires_its_input() {
        let reg = registry();
        let cfg = three_stage().starting_at(1);
        let err = run_pipeline(FactState::from_document("x"), &cfg, &reg, &ZeroClock).unwrap_err();
        assert_eq!(
            err.error,
            PipelineError::MissingInput {
                name: "claims".to_string(),
                solver: "fetch".to_string()
            }
        );
        assert!(err.state.ledger.is_empty());

        let mut seeded = FactState::from_document("x");
        seeded.insert("claims", StateValue::Claims(vec![Claim::new("c1", "x")]));
        let out = run_pipeline(seeded, &cfg, &reg, &ZeroClock).unwrap();
        assert_eq!(out.ledger.len(), 2);
    }

    #[test]
    fn failure_halts_and_keeps_earlier_outputs() {
        let reg = registry();
        let mut cfg = three_stage();
        cfg.solvers[1].name = "broken".to_string();
        let err = run_pipeline(FactState::from_document("x"), &cfg, &reg, &ZeroClock).unwrap_err();
        assert_eq!(
            err.error,
            PipelineError::SolverFailure {
                name: "broken".to_string(),
                stage: Stage::Retriever,
                message: "backend exploded".to_string()
            }
        );
        let solvers: Vec<&str> = err.state.ledger.iter().map(|e| e.solver.as_str()).collect();
        assert_eq!(solvers, ["split", "broken"]);
        assert!(err.state.contains("claims"));
        assert!(!err.state.contains("verdicts"));
    }
}
