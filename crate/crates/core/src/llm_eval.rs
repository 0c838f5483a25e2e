//! Scoring an LLM's answers on the seven question subsets.
//!
//! Short-answer subsets are scored by exact matching (`snowballing`,
//! `selfaware`), `freshqa` by a pluggable judge, and the four free-form
//! subsets by fact-checking the response and taking the share of true claims.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subset {
    #[serde(rename = "snowballing")]
    Snowballing,
    #[serde(rename = "selfaware")]
    SelfAware,
    #[serde(rename = "freshqa")]
    FreshQa,
    #[serde(rename = "factoolqa")]
    FacToolQa,
    #[serde(rename = "felm-wk")]
    FelmWk,
    #[serde(rename = "factcheck-bench")]
    FactcheckBench,
    #[serde(rename = "factscore-bio")]
    FactScoreBio,
}

/// How a subset is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scoring {
    YesNo,
    SelfAware,
    Judge,
    FreeForm,
}

impl Subset {
    pub const ALL: [Subset; 7] = [
        Subset::Snowballing,
        Subset::SelfAware,
        Subset::FreshQa,
        Subset::FacToolQa,
        Subset::FelmWk,
        Subset::FactcheckBench,
        Subset::FactScoreBio,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Subset::Snowballing => "snowballing",
            Subset::SelfAware => "selfaware",
            Subset::FreshQa => "freshqa",
            Subset::FacToolQa => "factoolqa",
            Subset::FelmWk => "felm-wk",
            Subset::FactcheckBench => "factcheck-bench",
            Subset::FactScoreBio => "factscore-bio",
        }
    }

    pub fn scoring(self) -> Scoring {
        match self {
            Subset::Snowballing => Scoring::YesNo,
            Subset::SelfAware => Scoring::SelfAware,
            Subset::FreshQa => Scoring::Judge,
            _ => Scoring::FreeForm,
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Knowledge (1), over-commitment to false premises (2), and inability to
/// track fast-changing facts (3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ErrorType {
    Type1,
    Type2,
    Type3,
}

impl ErrorType {
    pub const ALL: [ErrorType; 3] = [ErrorType::Type1, ErrorType::Type2, ErrorType::Type3];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionRecord {
    pub id: String,
    pub question: String,
    pub domain: String,
    pub topic: String,
    pub ability: String,
    pub task: String,
    pub source: String,
    pub subset: Subset,
    #[serde(default)]
    pub error_types: BTreeSet<ErrorType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answerable: Option<bool>,
    /// Up-to-date answer passed to the judge on fast-changing questions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_answer: Option<String>,
}

impl QuestionRecord {
    /// Field-level schema rules beyond what deserialization enforces.
    pub fn validate(&self) -> Result<(), String> {
        for (field, value) in [
            ("id", &self.id),
            ("question", &self.question),
            ("domain", &self.domain),
            ("topic", &self.topic),
            ("ability", &self.ability),
            ("task", &self.task),
            ("source", &self.source),
        ] {
            if value.trim().is_empty() {
                return Err(format!("field `{field}` is empty"));
            }
        }
        match self.subset {
            Subset::Snowballing => match self.gold_answer.as_deref() {
                Some("yes") | Some("no") => Ok(()),
                other => Err(format!("snowballing gold_answer must be yes or no, got {other:?}")),
            },
            Subset::SelfAware if self.answerable.is_none() => Err("selfaware record needs `answerable`".to_string()),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ManifestError {
    #[error("manifest schema error: {0}")]
    Schema(String),
    #[error("subset {subset}: declared {declared} records, found {found}")]
    Count {
        subset: Subset,
        declared: usize,
        found: usize,
    },
    #[error("declared total {declared} but found {found} records")]
    Total { declared: usize, found: usize },
    #[error("duplicate question id `{0}`")]
    DuplicateId(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestHeader {
    pub name: String,
    pub declared_counts: BTreeMap<Subset, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub name: String,
    pub records: Vec<QuestionRecord>,
    pub declared_counts: BTreeMap<Subset, usize>,
    pub declared_total: Option<usize>,
}

impl DatasetManifest {
    /// Assembles and validates a manifest. Count checks run in subset order
    /// and report the first mismatching subset.
    pub fn new(header: ManifestHeader, records: Vec<QuestionRecord>) -> Result<Self, ManifestError> {
        let manifest = DatasetManifest {
            name: header.name,
            records,
            declared_counts: header.declared_counts,
            declared_total: header.total,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<(), ManifestError> {
        let mut ids = BTreeSet::new();
        let mut found: BTreeMap<Subset, usize> = BTreeMap::new();
        for r in &self.records {
            r.validate()
                .map_err(|e| ManifestError::Schema(format!("record `{}`: {e}", r.id)))?;
            if !ids.insert(r.id.as_str()) {
                return Err(ManifestError::DuplicateId(r.id.clone()));
            }
            *found.entry(r.subset).or_insert(0) += 1;
        }
        for subset in Subset::ALL {
            let declared = self.declared_counts.get(&subset).copied().unwrap_or(0);
            let found = found.get(&subset).copied().unwrap_or(0);
            if declared != found {
                return Err(ManifestError::Count {
                    subset,
                    declared,
                    found,
                });
            }
        }
        let declared_sum: usize = self.declared_counts.values().sum();
        if let Some(total) = self.declared_total {
            if total != declared_sum || total != self.records.len() {
                return Err(ManifestError::Total {
                    declared: total,
                    found: self.records.len(),
                });
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&QuestionRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainCount {
    pub domain: String,
    pub count: usize,
}

/// Records per domain label, largest first; equal counts by label.
pub fn domain_distribution(records: &[QuestionRecord]) -> Vec<DomainCount> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        *counts.entry(r.domain.as_str()).or_insert(0) += 1;
    }
    let mut out: Vec<DomainCount> = counts
        .into_iter()
        .map(|(d, c)| DomainCount {
            domain: d.to_string(),
            count: c,
        })
        .collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.domain.cmp(&b.domain)));
    out
}

/// Lowercased words with punctuation removed.
pub fn normalize_words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

/// The first `yes` or `no` word of the response, if any.
pub fn first_yes_no(response: &str) -> Option<bool> {
    normalize_words(response).into_iter().find_map(|w| match w.as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    })
}

/// Phrases that mark a response as declining to answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintyLexicon {
    pub phrases: Vec<String>,
}

impl Default for UncertaintyLexicon {
    fn default() -> Self {
        let phrases = [
            "i don't know",
            "i do not know",
            "i'm not sure",
            "i am not sure",
            "i am unable to",
            "i'm unable to",
            "i cannot answer",
            "i can't answer",
            "it is unknown",
            "it's unknown",
            "remains unknown",
            "is not known",
            "no one knows",
            "nobody knows",
            "cannot be determined",
            "can't be determined",
            "impossible to know",
            "impossible to determine",
            "there is no definitive answer",
            "there is no definite answer",
            "not possible to know",
            "no scientific consensus",
            "it is unclear",
            "it's unclear",
            "uncertain",
        ];
        UncertaintyLexicon {
            phrases: phrases.iter().map(|p| p.to_string()).collect(),
        }
    }
}

fn normalize_phrase(text: &str) -> String {
    let lowered: String = text
        .chars()
        .map(|c| if c == '\u{2019}' { '\'' } else { c })
        .flat_map(char::to_lowercase)
        .collect();
    let mut out = String::with_capacity(lowered.len());
    for w in lowered.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(w);
    }
    out
}

impl UncertaintyLexicon {
    pub fn is_refusal(&self, response: &str) -> bool {
        let text = normalize_phrase(response);
        self.phrases.iter().any(|p| text.contains(normalize_phrase(p).as_str()))
    }
}

/// Per-row scoring result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowResult {
    /// `predicted` is `None` when the response has no yes/no word; such rows
    /// count as incorrect.
    YesNo {
        gold_yes: bool,
        predicted: Option<bool>,
    },
    SelfAware {
        answerable: bool,
        refused: bool,
    },
    Judged {
        correct: bool,
    },
    FreeForm {
        n_true: usize,
        n_false: usize,
        n_unknown: usize,
    },
    Skipped {
        reason: String,
    },
}

impl RowResult {
    /// Row score in `[0, 1]`; `None` for skipped rows and free-form rows
    /// without any True/False claim.
    pub fn score(&self) -> Option<f64> {
        let b = |x: bool| if x { 1.0 } else { 0.0 };
        match self {
            RowResult::YesNo { gold_yes, predicted } => Some(b(*predicted == Some(*gold_yes))),
            RowResult::SelfAware { answerable, refused } => Some(b(*refused != *answerable)),
            RowResult::Judged { correct } => Some(b(*correct)),
            RowResult::FreeForm { n_true, n_false, .. } => {
                (n_true + n_false > 0).then(|| *n_true as f64 / (n_true + n_false) as f64)
            }
            RowResult::Skipped { .. } => None,
        }
    }

    pub fn is_skipped(&self) -> bool {
        matches!(self, RowResult::Skipped { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedRow {
    pub id: String,
    pub subset: Subset,
    pub error_types: BTreeSet<ErrorType>,
    pub result: RowResult,
    #[serde(default)]
    pub cost_usd: f64,
    #[serde(default)]
    pub time_seconds: f64,
}

impl EvaluatedRow {
    pub fn new(record: &QuestionRecord, result: RowResult) -> Self {
        EvaluatedRow {
            id: record.id.clone(),
            subset: record.subset,
            error_types: record.error_types.clone(),
            result,
            cost_usd: 0.0,
            time_seconds: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScoreError {
    #[error("record `{0}` is not scored by exact matching")]
    NotExactMatch(String),
    #[error("record `{0}` lacks the gold field its subset needs")]
    MissingGold(String),
}

/// Exact-match scoring for `snowballing` and `selfaware` rows.
pub fn eval_exact_match(
    record: &QuestionRecord,
    response: &str,
    lexicon: &UncertaintyLexicon,
) -> Result<RowResult, ScoreError> {
    match record.subset.scoring() {
        Scoring::YesNo => {
            let gold_yes = match record.gold_answer.as_deref().map(str::trim) {
                Some(g) if g.eq_ignore_ascii_case("yes") => true,
                Some(g) if g.eq_ignore_ascii_case("no") => false,
                _ => return Err(ScoreError::MissingGold(record.id.clone())),
            };
            Ok(RowResult::YesNo {
                gold_yes,
                predicted: first_yes_no(response),
            })
        }
        Scoring::SelfAware => {
            let answerable = record
                .answerable
                .ok_or_else(|| ScoreError::MissingGold(record.id.clone()))?;
            Ok(RowResult::SelfAware {
                answerable,
                refused: lexicon.is_refusal(response),
            })
        }
        _ => Err(ScoreError::NotExactMatch(record.id.clone())),
    }
}

pub const JUDGE_PROMPT: &str = "You are grading an answer to a question whose correct answer may \
change over time or rest on a false premise. Reply with `correct` or `incorrect` as the first \
word, optionally followed by a short reason.";

pub fn judge_prompt(record: &QuestionRecord, response: &str) -> String {
    let mut prompt = format!("{JUDGE_PROMPT}\n\nQuestion: {}\n", record.question);
    if let Some(note) = &record.current_answer {
        prompt.push_str(&format!("Current answer: {note}\n"));
    }
    prompt.push_str(&format!("Response: {response}\nGrade:"));
    prompt
}

/// `correct` -> true, `incorrect` -> false, from the first word only.
pub fn parse_judge_output(output: &str) -> Option<bool> {
    let first = output.split_whitespace().next()?;
    let word = first.trim_matches(|c: char| !c.is_alphanumeric());
    if word.eq_ignore_ascii_case("correct") {
        Some(true)
    } else if word.eq_ignore_ascii_case("incorrect") {
        Some(false)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub label: String,
    pub value: f64,
}

fn point(label: &str, value: f64) -> ChartPoint {
    ChartPoint {
        label: label.to_string(),
        value,
    }
}

/// 2x2 gold-by-predicted counts plus a per-gold-row tally of responses
/// without a parseable prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryConfusion {
    pub gold_labels: [String; 2],
    pub predicted_labels: [String; 2],
    pub matrix: [[usize; 2]; 2],
    pub unparseable: [usize; 2],
}

impl BinaryConfusion {
    fn new(gold: [&str; 2], predicted: [&str; 2]) -> Self {
        BinaryConfusion {
            gold_labels: gold.map(ToString::to_string),
            predicted_labels: predicted.map(ToString::to_string),
            matrix: [[0; 2]; 2],
            unparseable: [0; 2],
        }
    }

    pub fn total(&self) -> usize {
        self.matrix.iter().flatten().sum::<usize>() + self.unparseable.iter().sum::<usize>()
    }

    pub fn trace(&self) -> usize {
        self.matrix[0][0] + self.matrix[1][1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetStatus {
    Evaluated,
    Absent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetReport {
    pub subset: Subset,
    pub status: SubsetStatus,
    pub n_evaluated: usize,
    pub n_skipped: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<BinaryConfusion>,
    /// Correct/incorrect shares of judged rows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pie: Option<Vec<ChartPoint>>,
    /// True/False/Unknown shares over every claim checked in the subset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub claim_bars: Option<Vec<ChartPoint>>,
    /// Free-form rows whose claims were all Unknown.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_undefined: Option<usize>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub skipped_reasons: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTypeScore {
    pub error_type: ErrorType,
    /// Scored rows tagged with this error type.
    pub n: usize,
    /// Sum of row scores (correct counts for short answers).
    pub score_sum: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportTotals {
    pub cost_usd: f64,
    pub time_seconds: f64,
    pub n_evaluated: usize,
    pub n_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmReport {
    pub model_name: String,
    pub subsets: Vec<SubsetReport>,
    pub error_types: Vec<ErrorTypeScore>,
    pub totals: ReportTotals,
}

impl LlmReport {
    pub fn subset(&self, subset: Subset) -> &SubsetReport {
        self.subsets
            .iter()
            .find(|s| s.subset == subset)
            .expect("every subset has a slot")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no rows were evaluated")]
pub struct EmptyEvaluationError;

fn ratio(num: f64, den: usize) -> Option<f64> {
    (den > 0).then(|| num / den as f64)
}

/// Reduces row results into the report. Rows are sorted by subset and id
/// first, so the output does not depend on completion order.
pub fn aggregate_report(model_name: &str, rows: &[EvaluatedRow]) -> Result<LlmReport, EmptyEvaluationError> {
    let mut rows: Vec<&EvaluatedRow> = rows.iter().collect();
    rows.sort_by(|a, b| a.subset.cmp(&b.subset).then_with(|| a.id.cmp(&b.id)));
    let n_evaluated = rows.iter().filter(|r| !r.result.is_skipped()).count();
    if n_evaluated == 0 {
        return Err(EmptyEvaluationError);
    }

    let subsets = Subset::ALL
        .iter()
        .map(|&subset| {
            let members: Vec<&EvaluatedRow> = rows.iter().copied().filter(|r| r.subset == subset).collect();
            subset_report(subset, &members)
        })
        .collect();

    let error_types = ErrorType::ALL
        .iter()
        .map(|&et| {
            let scores: Vec<f64> = rows
                .iter()
                .filter(|r| r.error_types.contains(&et))
                .filter_map(|r| r.result.score())
                .collect();
            let score_sum: f64 = scores.iter().sum();
            ErrorTypeScore {
                error_type: et,
                n: scores.len(),
                score_sum,
                accuracy: ratio(score_sum, scores.len()),
            }
        })
        .collect();

    Ok(LlmReport {
        model_name: model_name.to_string(),
        subsets,
        error_types,
        totals: ReportTotals {
            cost_usd: rows.iter().map(|r| r.cost_usd).sum(),
            time_seconds: rows.iter().map(|r| r.time_seconds).sum(),
            n_evaluated,
            n_skipped: rows.len() - n_evaluated,
        },
    })
}

fn subset_report(subset: Subset, rows: &[&EvaluatedRow]) -> SubsetReport {
    let mut report = SubsetReport {
        subset,
        status: if rows.is_empty() {
            SubsetStatus::Absent
        } else {
            SubsetStatus::Evaluated
        },
        n_evaluated: 0,
        n_skipped: 0,
        accuracy: None,
        confusion: None,
        pie: None,
        claim_bars: None,
        n_undefined: None,
        skipped_reasons: BTreeMap::new(),
    };
    if rows.is_empty() {
        return report;
    }
    let mut confusion = match subset.scoring() {
        Scoring::YesNo => Some(BinaryConfusion::new(["yes", "no"], ["yes", "no"])),
        Scoring::SelfAware => Some(BinaryConfusion::new(
            ["answerable", "unanswerable"],
            ["answered", "refused"],
        )),
        _ => None,
    };
    let (mut judged_correct, mut judged) = (0usize, 0usize);
    let (mut ct, mut cf, mut cu) = (0usize, 0usize, 0usize);
    let mut undefined = 0usize;
    let mut scores = Vec::new();
    for row in rows {
        match &row.result {
            RowResult::Skipped { reason } => {
                report.n_skipped += 1;
                *report.skipped_reasons.entry(reason.clone()).or_insert(0) += 1;
                continue;
            }
            RowResult::YesNo { gold_yes, predicted } => {
                if let Some(c) = confusion.as_mut() {
                    let g = usize::from(!gold_yes);
                    match predicted {
                        Some(p) => c.matrix[g][usize::from(!p)] += 1,
                        None => c.unparseable[g] += 1,
                    }
                }
            }
            RowResult::SelfAware { answerable, refused } => {
                if let Some(c) = confusion.as_mut() {
                    c.matrix[usize::from(!answerable)][usize::from(*refused)] += 1;
                }
            }
            RowResult::Judged { correct } => {
                judged += 1;
                judged_correct += usize::from(*correct);
            }
            RowResult::FreeForm {
                n_true,
                n_false,
                n_unknown,
            } => {
                ct += n_true;
                cf += n_false;
                cu += n_unknown;
                if n_true + n_false == 0 {
                    undefined += 1;
                }
            }
        }
        report.n_evaluated += 1;
        if let Some(s) = row.result.score() {
            scores.push(s);
        }
    }
    report.accuracy = ratio(scores.iter().sum(), scores.len());
    match subset.scoring() {
        Scoring::YesNo | Scoring::SelfAware => report.confusion = confusion,
        Scoring::Judge => {
            if judged > 0 {
                let c = judged_correct as f64 / judged as f64;
                report.pie = Some(vec![point("correct", c), point("incorrect", 1.0 - c)]);
            }
        }
        Scoring::FreeForm => {
            report.n_undefined = Some(undefined);
            let total = ct + cf + cu;
            if total > 0 {
                let t = total as f64;
                report.claim_bars = Some(vec![
                    point("True", ct as f64 / t),
                    point("False", cf as f64 / t),
                    point("Unknown", cu as f64 / t),
                ]);
            }
        }
    }
    report
}
