//! The shared store carried through a pipeline run.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::pipeline::Stage;
use crate::types::{Claim, EvidenceItem, Verdict};

/// A value stored under a name in [`FactState`].
///
/// Serialized externally tagged, e.g. `{"claims": [...]}`, so the kind of a
/// value survives a JSON round trip even under user-chosen names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateValue {
    Document(String),
    Claims(Vec<Claim>),
    /// claim id -> evidence passages
    Evidence(BTreeMap<String, Vec<EvidenceItem>>),
    /// claim id -> verdict
    Verdicts(BTreeMap<String, Verdict>),
}

impl StateValue {
    pub fn kind(&self) -> &'static str {
        match self {
            StateValue::Document(_) => "document",
            StateValue::Claims(_) => "claims",
            StateValue::Evidence(_) => "evidence",
            StateValue::Verdicts(_) => "verdicts",
        }
    }
}

/// Wall time and cost spent by one solver invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub solver: String,
    pub stage: Stage,
    pub wall_time_seconds: f64,
    pub cost_usd: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StateError {
    #[error("no value named `{0}` in state")]
    Missing(String),
    #[error("value `{name}` has kind {found}, expected {expected}")]
    WrongKind {
        name: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("no claims in state cover claim id `{0}`")]
    DanglingClaimId(String),
    #[error("ledger entry for `{0}` has a negative or non-finite time or cost")]
    BadLedger(String),
}

/// Name-addressed values plus the per-solver ledger.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FactState {
    pub entries: BTreeMap<String, StateValue>,
    #[serde(default)]
    pub ledger: Vec<LedgerEntry>,
}

impl FactState {
    pub fn new() -> Self {
        FactState::default()
    }

    /// State holding `text` under the name `document`.
    pub fn from_document(text: impl Into<String>) -> Self {
        let mut state = FactState::new();
        state.insert("document", StateValue::Document(text.into()));
        state
    }

    pub fn insert(&mut self, name: impl Into<String>, value: StateValue) -> Option<StateValue> {
        self.entries.insert(name.into(), value)
    }

    pub fn get(&self, name: &str) -> Option<&StateValue> {
        self.entries.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn document(&self, name: &str) -> Result<&str, StateError> {
        match self.lookup(name)? {
            StateValue::Document(text) => Ok(text),
            other => Err(wrong_kind(name, "document", other)),
        }
    }

    pub fn claims(&self, name: &str) -> Result<&[Claim], StateError> {
        match self.lookup(name)? {
            StateValue::Claims(claims) => Ok(claims),
            other => Err(wrong_kind(name, "claims", other)),
        }
    }

    pub fn evidence(&self, name: &str) -> Result<&BTreeMap<String, Vec<EvidenceItem>>, StateError> {
        match self.lookup(name)? {
            StateValue::Evidence(ev) => Ok(ev),
            other => Err(wrong_kind(name, "evidence", other)),
        }
    }

    pub fn verdicts(&self, name: &str) -> Result<&BTreeMap<String, Verdict>, StateError> {
        match self.lookup(name)? {
            StateValue::Verdicts(v) => Ok(v),
            other => Err(wrong_kind(name, "verdicts", other)),
        }
    }

    /// Resolves the claim for every id in `ids`, searching every claims-valued
    /// entry in name order. Verifiers use this to recover claim text when
    /// their configured input is an evidence map.
    pub fn resolve_claims<'a, I>(&self, ids: I) -> Result<Vec<Claim>, StateError>
    where
        I: IntoIterator<Item = &'a String>,
    {
        let index = self.claim_index();
        ids.into_iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .map(|c| (*c).clone())
                    .ok_or_else(|| StateError::DanglingClaimId(id.clone()))
            })
            .collect()
    }

    /// The evidence map covering `claim_id`, if any evidence-valued entry has it.
    pub fn evidence_for(&self, claim_id: &str) -> Option<&[EvidenceItem]> {
        self.entries.values().find_map(|v| match v {
            StateValue::Evidence(ev) => ev.get(claim_id).map(Vec::as_slice),
            _ => None,
        })
    }

    pub fn total_time_seconds(&self) -> f64 {
        self.ledger.iter().map(|e| e.wall_time_seconds).sum()
    }

    pub fn total_cost_usd(&self) -> f64 {
        self.ledger.iter().map(|e| e.cost_usd).sum()
    }

    /// Every claim id used as a key refers to a known claim, and the ledger is
    /// non-negative.
    pub fn check_invariants(&self) -> Result<(), StateError> {
        let known: BTreeSet<&str> = self.claim_index().keys().copied().collect();
        for value in self.entries.values() {
            let keys: Vec<&String> = match value {
                StateValue::Evidence(ev) => ev.keys().collect(),
                StateValue::Verdicts(v) => v.keys().collect(),
                _ => continue,
            };
            if let Some(k) = keys.into_iter().find(|k| !known.contains(k.as_str())) {
                return Err(StateError::DanglingClaimId(k.clone()));
            }
        }
        for entry in &self.ledger {
            let ok = |x: f64| x.is_finite() && x >= 0.0;
            if !ok(entry.wall_time_seconds) || !ok(entry.cost_usd) {
                return Err(StateError::BadLedger(entry.solver.clone()));
            }
        }
        Ok(())
    }

    fn lookup(&self, name: &str) -> Result<&StateValue, StateError> {
        self.entries
            .get(name)
            .ok_or_else(|| StateError::Missing(name.to_string()))
    }

    fn claim_index(&self) -> BTreeMap<&str, &Claim> {
        let mut index = BTreeMap::new();
        for value in self.entries.values() {
            if let StateValue::Claims(claims) = value {
                for claim in claims {
                    index.entry(claim.id.as_str()).or_insert(claim);
                }
            }
        }
        index
    }
}

fn wrong_kind(name: &str, expected: &'static str, found: &StateValue) -> StateError {
    StateError::WrongKind {
        name: name.to_string(),
        expected,
        found: found.kind(),
    }
}
