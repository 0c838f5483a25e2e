//! Stance detection, majority voting and the stance -> factuality mapping
//! used by NLI-style verification.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::segment::split_claims_rule;
use crate::text::{content_words, is_negation, tokenize};
use crate::types::{Claim, EvidenceItem, Label, StanceLabel, UnknownReason, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StanceError {
    #[error("cannot take a majority vote over zero stances")]
    EmptyVote,
    #[error("stance classifier failed: {0}")]
    Classifier(String),
}

/// Most frequent stance; any tie for the maximum yields neutral.
pub fn majority_vote(stances: &[StanceLabel]) -> Result<StanceLabel, StanceError> {
    if stances.is_empty() {
        return Err(StanceError::EmptyVote);
    }
    let mut counts = [0usize; 3];
    for s in stances {
        counts[stance_index(*s)] += 1;
    }
    let max = counts.iter().copied().max().unwrap_or(0);
    let mut leaders = StanceLabel::ALL.iter().filter(|s| counts[stance_index(**s)] == max);
    match (leaders.next(), leaders.next()) {
        (Some(only), None) => Ok(*only),
        _ => Ok(StanceLabel::Neutral),
    }
}

fn stance_index(s: StanceLabel) -> usize {
    match s {
        StanceLabel::Entailment => 0,
        StanceLabel::Contradiction => 1,
        StanceLabel::Neutral => 2,
    }
}

/// entailment -> True, contradiction -> False, neutral -> Unknown.
pub fn stance_to_label(stance: StanceLabel) -> Label {
    match stance {
        StanceLabel::Entailment => Label::True,
        StanceLabel::Contradiction => Label::False,
        StanceLabel::Neutral => Label::Unknown,
    }
}

/// Pairwise classifier: stance of `premise` (an evidence passage) towards
/// `hypothesis` (a claim).
pub trait StanceClassifier: Send + Sync {
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<StanceLabel, StanceError>;
}

impl<F> StanceClassifier for F
where
    F: Fn(&str, &str) -> Result<StanceLabel, StanceError> + Send + Sync,
{
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<StanceLabel, StanceError> {
        self(premise, hypothesis)
    }
}

/// Deterministic lexical-overlap classifier.
///
/// A passage sentence that contains at least `threshold` of the claim's
/// content words entails the claim when both have the same negation parity
/// and contradicts it otherwise. Any entailing sentence wins over a
/// contradicting one; no matching sentence means neutral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LexicalStance {
    pub threshold: f64,
}

impl Default for LexicalStance {
    fn default() -> Self {
        LexicalStance { threshold: 0.8 }
    }
}

fn negated(text: &str) -> bool {
    tokenize(text).iter().filter(|t| is_negation(t)).count() % 2 == 1
}

impl LexicalStance {
    pub fn stance(&self, premise: &str, hypothesis: &str) -> StanceLabel {
        let claim_words: BTreeSet<String> = content_words(hypothesis).into_iter().collect();
        if claim_words.is_empty() {
            return StanceLabel::Neutral;
        }
        let claim_negated = negated(hypothesis);
        let mut contradiction = false;
        for sentence in split_claims_rule(premise) {
            let words: BTreeSet<String> = tokenize(&sentence.text).into_iter().collect();
            let hit = claim_words.iter().filter(|w| words.contains(*w)).count();
            if (hit as f64) < self.threshold * claim_words.len() as f64 {
                continue;
            }
            if negated(&sentence.text) == claim_negated {
                return StanceLabel::Entailment;
            }
            contradiction = true;
        }
        if contradiction {
            StanceLabel::Contradiction
        } else {
            StanceLabel::Neutral
        }
    }
}

impl StanceClassifier for LexicalStance {
    fn classify(&self, premise: &str, hypothesis: &str) -> Result<StanceLabel, StanceError> {
        Ok(self.stance(premise, hypothesis))
    }
}

/// Verdict from the majority stance of every evidence passage towards the
/// claim. Supporting evidence lists the passages that voted with the
/// majority.
pub fn verify_nli(
    claim: &Claim,
    evidence: &[EvidenceItem],
    classifier: &dyn StanceClassifier,
) -> Result<Verdict, StanceError> {
    if evidence.is_empty() {
        return Ok(Verdict::unknown(UnknownReason::InsufficientEvidence));
    }
    let stances = evidence
        .iter()
        .map(|e| classifier.classify(&e.text, &claim.text))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(verdict_from_stances(&stances, evidence))
}

/// The mapping step of [`verify_nli`], separated so it can be checked on
/// stance multisets directly.
pub fn verdict_from_stances(stances: &[StanceLabel], evidence: &[EvidenceItem]) -> Verdict {
    let majority = match majority_vote(stances) {
        Ok(s) => s,
        Err(_) => return Verdict::unknown(UnknownReason::InsufficientEvidence),
    };
    let support = stances
        .iter()
        .zip(evidence)
        .filter(|(s, _)| **s == majority)
        .map(|(_, e)| e.source_id.clone())
        .collect();
    Verdict::from_label(stance_to_label(majority), support)
}
