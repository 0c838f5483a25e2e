//! Scoring fact-checkers against gold labels, and ranking them.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::types::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dataset {
    #[serde(rename = "factool-qa")]
    FacToolQa,
    #[serde(rename = "felm-wk")]
    FelmWk,
    #[serde(rename = "factcheck-bench")]
    FactcheckBench,
    #[serde(rename = "halueval")]
    HaluEval,
}

impl Dataset {
    pub const ALL: [Dataset; 4] = [
        Dataset::FacToolQa,
        Dataset::FelmWk,
        Dataset::FactcheckBench,
        Dataset::HaluEval,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dataset::FacToolQa => "factool-qa",
            Dataset::FelmWk => "felm-wk",
            Dataset::FactcheckBench => "factcheck-bench",
            Dataset::HaluEval => "halueval",
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Claim,
    Segment,
    Document,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldRecord {
    pub id: String,
    pub dataset: Dataset,
    pub granularity: Granularity,
    pub text: String,
    pub label: Label,
}

/// Declared label counts for one dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelCounts {
    #[serde(rename = "true")]
    pub n_true: usize,
    #[serde(rename = "false")]
    pub n_false: usize,
    #[serde(rename = "unknown")]
    pub n_unknown: usize,
    pub total: usize,
}

impl LabelCounts {
    pub const fn new(n_true: usize, n_false: usize, n_unknown: usize) -> Self {
        LabelCounts {
            n_true,
            n_false,
            n_unknown,
            total: n_true + n_false + n_unknown,
        }
    }

    fn add(&mut self, label: Label) {
        match label {
            Label::True => self.n_true += 1,
            Label::False => self.n_false += 1,
            Label::Unknown => self.n_unknown += 1,
        }
        self.total += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldHeader {
    pub name: String,
    pub declared_counts: BTreeMap<Dataset, LabelCounts>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GoldError {
    #[error("gold schema error: {0}")]
    Schema(String),
    #[error("dataset {dataset}: declared {declared:?}, found {found:?}")]
    Count {
        dataset: Dataset,
        declared: LabelCounts,
        found: LabelCounts,
    },
    #[error("duplicate gold id `{0}`")]
    DuplicateId(String),
}

/// Checks records against the header, dataset by dataset in declaration
/// order; the first dataset whose counts differ is reported.
pub fn validate_gold(header: &GoldHeader, records: &[GoldRecord]) -> Result<(), GoldError> {
    for (dataset, counts) in &header.declared_counts {
        if counts.total != counts.n_true + counts.n_false + counts.n_unknown {
            return Err(GoldError::Schema(format!(
                "dataset {dataset}: total {} is not the sum of its label counts",
                counts.total
            )));
        }
    }
    let mut ids = BTreeSet::new();
    let mut found: BTreeMap<Dataset, LabelCounts> = BTreeMap::new();
    for r in records {
        if !ids.insert(r.id.as_str()) {
            return Err(GoldError::DuplicateId(r.id.clone()));
        }
        if r.dataset == Dataset::HaluEval && r.granularity != Granularity::Document {
            return Err(GoldError::Schema(format!(
                "record `{}`: halueval records are document-level",
                r.id
            )));
        }
        if r.text.trim().is_empty() {
            return Err(GoldError::Schema(format!("record `{}`: empty text", r.id)));
        }
        found.entry(r.dataset).or_default().add(r.label);
    }
    for dataset in Dataset::ALL {
        let declared = header.declared_counts.get(&dataset).copied().unwrap_or_default();
        let got = found.get(&dataset).copied().unwrap_or_default();
        if declared != got {
            return Err(GoldError::Count {
                dataset,
                declared,
                found: got,
            });
        }
    }
    Ok(())
}

/// One checker prediction joined to its gold record.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPrediction {
    pub gold: Label,
    pub predicted: Label,
    pub time_s: f64,
    pub cost_usd: f64,
}

impl ScoredPrediction {
    pub fn new(gold: Label, predicted: Label) -> Self {
        ScoredPrediction {
            gold,
            predicted,
            time_s: 0.0,
            cost_usd: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckerMetrics {
    pub n: usize,
    /// Rows whose gold label is True or False.
    pub n_binary: usize,
    /// Rows with gold Unknown; in the confusion matrix only.
    pub n_unknown_gold: usize,
    pub accuracy: f64,
    #[serde(rename = "True")]
    pub true_class: ClassMetrics,
    #[serde(rename = "False")]
    pub false_class: ClassMetrics,
    pub macro_f1: f64,
    /// Gold rows by predicted columns, both in True, False, Unknown order.
    pub confusion: [[usize; 3]; 3],
    pub total_time_seconds: f64,
    pub total_cost_usd: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("no predictions to score")]
    Empty,
    #[error("no rows with a True or False gold label")]
    NoBinaryGold,
}

fn div(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn class_metrics(confusion: &[[usize; 3]; 3], class: Label) -> ClassMetrics {
    let c = class.index();
    let binary = [Label::True.index(), Label::False.index()];
    let tp = confusion[c][c];
    // predicted as the class by a row whose gold is the other binary label
    let fp: usize = binary.iter().filter(|&&g| g != c).map(|&g| confusion[g][c]).sum();
    let fn_: usize = (0..3).filter(|&p| p != c).map(|p| confusion[c][p]).sum();
    let precision = div(tp, tp + fp);
    let recall = div(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics { precision, recall, f1 }
}

/// Precision/recall/F1 for the True and False classes over rows with a
/// binary gold label; gold-Unknown rows only enter the confusion matrix.
/// A predicted Unknown against a binary gold label is a miss. Zero
/// denominators give 0.
pub fn compute_metrics(pairs: &[ScoredPrediction]) -> Result<CheckerMetrics, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut confusion = [[0usize; 3]; 3];
    for p in pairs {
        confusion[p.gold.index()][p.predicted.index()] += 1;
    }
    let n_unknown_gold: usize = confusion[Label::Unknown.index()].iter().sum();
    let n_binary = pairs.len() - n_unknown_gold;
    if n_binary == 0 {
        return Err(MetricsError::NoBinaryGold);
    }
    let correct = confusion[0][0] + confusion[1][1];
    let true_class = class_metrics(&confusion, Label::True);
    let false_class = class_metrics(&confusion, Label::False);
    Ok(CheckerMetrics {
        n: pairs.len(),
        n_binary,
        n_unknown_gold,
        accuracy: div(correct, n_binary),
        macro_f1: (true_class.f1 + false_class.f1) / 2.0,
        true_class,
        false_class,
        confusion,
        total_time_seconds: pairs.iter().map(|p| p.time_s).sum(),
        total_cost_usd: pairs.iter().map(|p| p.cost_usd).sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submitter {
    pub name: String,
    pub email: String,
    pub opt_in: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub id: String,
    pub checker_name: String,
    pub submitter: Submitter,
    pub metrics: CheckerMetrics,
    /// Milliseconds since the Unix epoch.
    pub submitted_at: u64,
}

/// Leaderboard order: macro-F1 descending, then lower cost, lower time,
/// earlier submission; checker name and id settle anything left.
pub fn leaderboard_order(a: &LeaderboardEntry, b: &LeaderboardEntry) -> Ordering {
    b.metrics
        .macro_f1
        .total_cmp(&a.metrics.macro_f1)
        .then_with(|| a.metrics.total_cost_usd.total_cmp(&b.metrics.total_cost_usd))
        .then_with(|| a.metrics.total_time_seconds.total_cmp(&b.metrics.total_time_seconds))
        .then_with(|| a.submitted_at.cmp(&b.submitted_at))
        .then_with(|| a.checker_name.cmp(&b.checker_name))
        .then_with(|| a.id.cmp(&b.id))
}

/// Public listing: opted-in entries in leaderboard order.
pub fn rank_leaderboard(entries: &[LeaderboardEntry]) -> Vec<LeaderboardEntry> {
    let mut public: Vec<LeaderboardEntry> = entries.iter().filter(|e| e.submitter.opt_in).cloned().collect();
    public.sort_by(leaderboard_order);
    public
}

/// Public listing keeping only each checker's best entry.
pub fn best_per_checker(entries: &[LeaderboardEntry]) -> Vec<LeaderboardEntry> {
    let mut seen = BTreeSet::new();
    rank_leaderboard(entries)
        .into_iter()
        .filter(|e| seen.insert(e.checker_name.clone()))
        .collect()
}
