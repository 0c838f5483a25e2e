//! Response-level aggregation of per-claim verdicts.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::pipeline::{run_pipeline, Clock, PipelineConfig, Registry, RunFailure};
use crate::state::{FactState, StateError, StateValue};
use crate::types::{Claim, Label, Verdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimOutcome {
    pub claim: Claim,
    pub verdict: Verdict,
    pub evidence_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LedgerTotals {
    pub time_seconds: f64,
    pub cost_usd: f64,
}

/// Fact-check result for one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseReport {
    pub document: String,
    pub claims: Vec<ClaimOutcome>,
    /// Share of True among True/False verdicts; absent when every verdict is
    /// Unknown (or there are no claims).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credibility: Option<f64>,
    pub overall: Label,
    pub ledger_totals: LedgerTotals,
}

/// `(credibility, overall)` for a multiset of verdict labels.
///
/// Unknown labels are left out of the credibility denominator. Any False
/// makes the whole response False.
pub fn aggregate_labels<I: IntoIterator<Item = Label>>(labels: I) -> (Option<f64>, Label) {
    let (mut t, mut f) = (0usize, 0usize);
    for label in labels {
        match label {
            Label::True => t += 1,
            Label::False => f += 1,
            Label::Unknown => {}
        }
    }
    let credibility = (t + f > 0).then(|| t as f64 / (t + f) as f64);
    let overall = if f > 0 {
        Label::False
    } else if t > 0 {
        Label::True
    } else {
        Label::Unknown
    };
    (credibility, overall)
}

pub fn aggregate_report(
    document: impl Into<String>,
    claims: Vec<ClaimOutcome>,
    ledger_totals: LedgerTotals,
) -> ResponseReport {
    let (credibility, overall) = aggregate_labels(claims.iter().map(|c| c.verdict.label));
    ResponseReport {
        document: document.into(),
        claims,
        credibility,
        overall,
        ledger_totals,
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvaluateError {
    #[error(transparent)]
    Pipeline(#[from] RunFailure),
    #[error("pipeline output is not a verdict map: {0}")]
    Output(#[from] StateError),
}

/// Builds the report from a finished state whose `verdicts_name` entry holds
/// the verdicts. Claims are listed in the order they were extracted.
pub fn report_from_state(state: &FactState, verdicts_name: &str) -> Result<ResponseReport, StateError> {
    let verdicts = state.verdicts(verdicts_name)?;
    let mut seen = BTreeSet::new();
    let mut ordered: Vec<&Claim> = Vec::new();
    for value in state.entries.values() {
        if let StateValue::Claims(claims) = value {
            for c in claims {
                if verdicts.contains_key(&c.id) && seen.insert(c.id.as_str()) {
                    ordered.push(c);
                }
            }
        }
    }
    if let Some(id) = verdicts.keys().find(|id| !seen.contains(id.as_str())) {
        return Err(StateError::DanglingClaimId(id.clone()));
    }
    let document = state
        .entries
        .values()
        .find_map(|v| match v {
            StateValue::Document(d) => Some(d.clone()),
            _ => None,
        })
        .unwrap_or_default();
    let outcomes = ordered
        .into_iter()
        .map(|c| ClaimOutcome {
            claim: c.clone(),
            verdict: verdicts[&c.id].clone(),
            evidence_count: state.evidence_for(&c.id).map_or(0, <[_]>::len),
        })
        .collect();
    Ok(aggregate_report(
        document,
        outcomes,
        LedgerTotals {
            time_seconds: state.total_time_seconds(),
            cost_usd: state.total_cost_usd(),
        },
    ))
}

/// Runs `config` from the beginning over `document` and aggregates.
pub fn evaluate_response(
    document: &str,
    config: &PipelineConfig,
    registry: &Registry,
    clock: &dyn Clock,
) -> Result<ResponseReport, EvaluateError> {
    let mut state = FactState::new();
    let input = config
        .solvers
        .get(config.start_index)
        .map_or("document", |s| s.input_name.as_str());
    state.insert(input, StateValue::Document(String::from(document)));
    evaluate_state(state, config, registry, clock)
}

/// Like [`evaluate_response`] but from a prepared state, so a run can start
/// at any configured step.
pub fn evaluate_state(
    state: FactState,
    config: &PipelineConfig,
    registry: &Registry,
    clock: &dyn Clock,
) -> Result<ResponseReport, EvaluateError> {
    let out = run_pipeline(state, config, registry, clock)?;
    let last = config.solvers.last().map_or("verdicts", |s| s.output_name.as_str());
    Ok(report_from_state(&out, last)?)
}
