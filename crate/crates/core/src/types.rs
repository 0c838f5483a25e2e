//! Atomic fact-checking units: claims, evidence, stances and verdicts.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Half-open `[start, end)` range of character (not byte) offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A sentence-level assertion extracted from a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_span: Option<Span>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
}

impl Claim {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Claim {
            id: id.into(),
            text: text.into(),
            source_span: None,
            context: None,
        }
    }

    pub fn with_span(mut self, span: Span) -> Self {
        self.source_span = Some(span);
        self
    }

    /// Checks the claim invariants against the document it came from, if any.
    pub fn is_well_formed(&self, document_chars: Option<usize>) -> bool {
        if self.text.trim().is_empty() {
            return false;
        }
        match (self.source_span, document_chars) {
            (Some(span), Some(len)) => span.start <= span.end && span.end <= len,
            _ => true,
        }
    }
}

/// A passage returned by a retriever for one claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub text: String,
    pub source_id: String,
    pub score: f64,
}

/// Pairwise stance of an evidence passage towards a claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StanceLabel {
    Entailment,
    Contradiction,
    Neutral,
}

impl StanceLabel {
    pub const ALL: [StanceLabel; 3] = [
        StanceLabel::Entailment,
        StanceLabel::Contradiction,
        StanceLabel::Neutral,
    ];
}

/// Three-way factuality label shared by verdicts, gold labels and predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    True,
    False,
    Unknown,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::True, Label::False, Label::Unknown];

    /// Row/column index in 3x3 confusion matrices.
    pub fn index(self) -> usize {
        match self {
            Label::True => 0,
            Label::False => 1,
            Label::Unknown => 2,
        }
    }

    /// Parses `true` / `false` / `unknown`, ignoring ASCII case.
    pub fn parse_token(token: &str) -> Option<Label> {
        if token.eq_ignore_ascii_case("true") {
            Some(Label::True)
        } else if token.eq_ignore_ascii_case("false") {
            Some(Label::False)
        } else if token.eq_ignore_ascii_case("unknown") {
            Some(Label::Unknown)
        } else {
            None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::True => "True",
            Label::False => "False",
            Label::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownReason {
    InsufficientEvidence,
    Opinion,
}

/// Outcome of verifying a single claim.
///
/// `unknown_reason` is set exactly when `label` is [`Label::Unknown`]; the
/// constructors keep that invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unknown_reason: Option<UnknownReason>,
    #[serde(default)]
    pub supporting_evidence: Vec<String>,
}

impl Verdict {
    pub fn supported(evidence: Vec<String>) -> Self {
        Verdict {
            label: Label::True,
            unknown_reason: None,
            supporting_evidence: evidence,
        }
    }

    pub fn refuted(evidence: Vec<String>) -> Self {
        Verdict {
            label: Label::False,
            unknown_reason: None,
            supporting_evidence: evidence,
        }
    }

    pub fn unknown(reason: UnknownReason) -> Self {
        Verdict {
            label: Label::Unknown,
            unknown_reason: Some(reason),
            supporting_evidence: Vec::new(),
        }
    }

    /// Builds a verdict for `label`, using insufficient evidence as the
    /// reason when the label is unknown.
    pub fn from_label(label: Label, evidence: Vec<String>) -> Self {
        match label {
            Label::True => Verdict::supported(evidence),
            Label::False => Verdict::refuted(evidence),
            Label::Unknown => Verdict::unknown(UnknownReason::InsufficientEvidence),
        }
    }

    pub fn is_consistent(&self) -> bool {
        (self.label == Label::Unknown) == self.unknown_reason.is_some()
    }
}
