//! File-level checker evaluation: gold loading, verdict ingestion and
//! server-side runs of a local pipeline over the gold set.

use std::collections::{BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use factcheck_core::checker::{
    compute_metrics, validate_gold, CheckerMetrics, GoldError, GoldHeader, GoldRecord, Granularity, MetricsError,
    ScoredPrediction,
};
use factcheck_core::{evaluate_response, Claim, Clock, FactState, Label, PipelineConfig, Registry, Stage, StateValue};
use rayon::prelude::*;

use crate::jsonl::{read_with_header, JsonlError};
use crate::llm_eval::Ingested;

/// A validated gold file.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldSet {
    pub header: GoldHeader,
    pub records: Vec<GoldRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum GoldLoadError {
    #[error("cannot read gold file: {0}")]
    Io(#[from] std::io::Error),
    #[error("gold schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Invalid(#[from] GoldError),
}

pub fn read_factbench<R: std::io::BufRead>(reader: R) -> Result<GoldSet, GoldLoadError> {
    let (header, records): (GoldHeader, Vec<GoldRecord>) = read_with_header(reader).map_err(|e| match e {
        JsonlError::Io(e) => GoldLoadError::Io(e),
        other => GoldLoadError::Schema(other.to_string()),
    })?;
    validate_gold(&header, &records)?;
    Ok(GoldSet { header, records })
}

pub fn load_factbench(path: &Path) -> Result<GoldSet, GoldLoadError> {
    let file = std::fs::File::open(path)?;
    read_factbench(std::io::BufReader::new(file))
}

/// A submitted verdict joined to its gold record.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinedVerdict {
    pub gold: GoldRecord,
    pub predicted: Label,
    pub time_s: f64,
    pub cost_usd: f64,
}

impl JoinedVerdict {
    pub fn scored(&self) -> ScoredPrediction {
        ScoredPrediction {
            gold: self.gold.label,
            predicted: self.predicted,
            time_s: self.time_s,
            cost_usd: self.cost_usd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub row: usize,
    pub message: String,
}

impl std::fmt::Display for RowError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "row {}: {}", self.row, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VerdictIngestError {
    #[error("bad header: {0}")]
    Header(String),
    /// Every malformed row, in file order.
    #[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Format(Vec<RowError>),
    #[error("unknown claim ids: {}", .0.join(", "))]
    UnknownClaim(Vec<String>),
}

pub const VERDICTS_HEADER: &str = "claim_id,verdict[,time_s,cost_usd]";

fn column(names: &[&str], name: &str) -> Option<usize> {
    names.iter().position(|n| *n == name)
}

/// Joins a `claim_id,verdict[,time_s,cost_usd]` CSV to the gold set. Row
/// numbers count data rows from 1. Missing time/cost default to 0.
pub fn ingest_verdicts<R: Read>(reader: R, gold: &GoldSet) -> Result<Ingested<JoinedVerdict>, VerdictIngestError> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| VerdictIngestError::Header(e.to_string()))?
        .clone();
    let names: Vec<&str> = headers
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').trim())
        .collect();
    let allowed = ["claim_id", "verdict", "time_s", "cost_usd"];
    if let Some(extra) = names.iter().find(|n| !allowed.contains(n)) {
        return Err(VerdictIngestError::Header(format!(
            "unexpected column `{extra}`; expected {VERDICTS_HEADER}"
        )));
    }
    if names.iter().collect::<BTreeSet<_>>().len() != names.len() {
        return Err(VerdictIngestError::Header("repeated column".into()));
    }
    let (Some(id_col), Some(verdict_col)) = (column(&names, "claim_id"), column(&names, "verdict")) else {
        return Err(VerdictIngestError::Header(format!("expected {VERDICTS_HEADER}")));
    };
    let time_col = column(&names, "time_s");
    let cost_col = column(&names, "cost_usd");

    let index: HashMap<&str, &GoldRecord> = gold.records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut errors = Vec::new();
    let mut unknown = Vec::new();
    let mut seen = BTreeSet::new();
    let mut rows = Vec::new();
    for (i, rec) in csv.records().enumerate() {
        let row = i + 1;
        let mut fail = |message: String| errors.push(RowError { row, message });
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                fail(e.to_string());
                continue;
            }
        };
        let id = rec[id_col].trim();
        let predicted = match Label::parse_token(rec[verdict_col].trim()) {
            Some(l) => l,
            None => {
                fail(format!(
                    "invalid verdict `{}`; expected true, false or unknown",
                    &rec[verdict_col]
                ));
                continue;
            }
        };
        let mut number = |col: Option<usize>, name: &str| -> Option<f64> {
            let Some(c) = col else { return Some(0.0) };
            let raw = rec[c].trim();
            if raw.is_empty() {
                return Some(0.0);
            }
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => Some(v),
                _ => {
                    fail(format!("`{name}` must be a non-negative number, got `{raw}`"));
                    None
                }
            }
        };
        let (Some(time_s), Some(cost_usd)) = (number(time_col, "time_s"), number(cost_col, "cost_usd")) else {
            continue;
        };
        if !seen.insert(id.to_string()) {
            fail(format!("duplicate claim id `{id}`"));
            continue;
        }
        match index.get(id) {
            Some(g) => rows.push(JoinedVerdict {
                gold: (*g).clone(),
                predicted,
                time_s,
                cost_usd,
            }),
            None => unknown.push(id.to_string()),
        }
    }
    if !errors.is_empty() {
        return Err(VerdictIngestError::Format(errors));
    }
    if !unknown.is_empty() {
        return Err(VerdictIngestError::UnknownClaim(unknown));
    }
    let missing: Vec<String> = gold
        .records
        .iter()
        .filter(|r| !seen.contains(&r.id))
        .map(|r| r.id.clone())
        .collect();
    if !missing.is_empty() {
        log::warn!(
            "{} of {} gold records have no verdict",
            missing.len(),
            gold.records.len()
        );
    }
    Ok(Ingested { rows, missing })
}

pub fn score_submission(rows: &[JoinedVerdict]) -> Result<CheckerMetrics, MetricsError> {
    let pairs: Vec<ScoredPrediction> = rows.iter().map(JoinedVerdict::scored).collect();
    compute_metrics(&pairs)
}

/// Runs a local pipeline over each gold record with server-measured time
/// and cost. Claim and segment records enter at the first retriever with the
/// text as their only claim; document records run the whole pipeline and
/// take its overall label. A failed run predicts Unknown.
pub fn run_local_checker(
    records: &[GoldRecord],
    config: &PipelineConfig,
    registry: &Registry,
    clock: &(dyn Clock + Sync),
) -> Vec<JoinedVerdict> {
    records
        .par_iter()
        .map(|gold| {
            let outcome = match (gold.granularity, config.position_of(Stage::Retriever)) {
                (Granularity::Document, _) | (_, None) => evaluate_response(&gold.text, config, registry, clock)
                    .map(|r| (r.overall, r.ledger_totals.time_seconds, r.ledger_totals.cost_usd)),
                (_, Some(pos)) => {
                    let sub = config.starting_at(pos);
                    let mut state = FactState::new();
                    let claim = Claim::new(gold.id.clone(), gold.text.clone());
                    state.insert(sub.solvers[pos].input_name.clone(), StateValue::Claims(vec![claim]));
                    factcheck_core::response::evaluate_state(state, &sub, registry, clock).map(|r| {
                        let label = r.claims.first().map_or(Label::Unknown, |c| c.verdict.label);
                        (label, r.ledger_totals.time_seconds, r.ledger_totals.cost_usd)
                    })
                }
            };
            let (predicted, time_s, cost_usd) = outcome.unwrap_or_else(|e| {
                log::warn!("local checker failed on `{}`: {e}", gold.id);
                (Label::Unknown, 0.0, 0.0)
            });
            JoinedVerdict {
                gold: gold.clone(),
                predicted,
                time_s,
                cost_usd,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use factcheck_core::checker::{Dataset, LabelCounts};

    fn gold() -> GoldSet {
        let labels = [Label::True, Label::True, Label::False, Label::False];
        let records: Vec<GoldRecord> = labels
            .iter()
            .enumerate()
            .map(|(i, &label)| GoldRecord {
                id: format!("g{}", i + 1),
                dataset: Dataset::FacToolQa,
                granularity: Granularity::Claim,
                text: "x".into(),
                label,
            })
            .collect();
        let header = GoldHeader {
            name: "fixture".into(),
            declared_counts: [(Dataset::FacToolQa, LabelCounts::new(2, 2, 0))].into_iter().collect(),
        };
        validate_gold(&header, &records).unwrap();
        GoldSet { header, records }
    }

    #[test]
    fn four_rows_join_and_score() {
        let csv = "claim_id,verdict,time_s,cost_usd\ng1,True,1.5,0.01\ng2,false,0.5,0\ng3,FALSE,,\ng4,false,1,0.02\n";
        let got = ingest_verdicts(csv.as_bytes(), &gold()).unwrap();
        assert_eq!(got.rows.len(), 4);
        let m = score_submission(&got.rows).unwrap();
        assert_eq!(m.accuracy, 0.75);
        assert!((m.total_time_seconds - 3.0).abs() < 1e-12);
        assert!((m.total_cost_usd - 0.03).abs() < 1e-12);
    }

    #[test]
    fn time_and_cost_default_to_zero() {
        let csv = "claim_id,verdict\ng1,true\ng2,unknown\n";
        let got = ingest_verdicts(csv.as_bytes(), &gold()).unwrap();
        assert!(got.rows.iter().all(|r| r.time_s == 0.0 && r.cost_usd == 0.0));
        assert_eq!(got.missing, ["g3", "g4"]);
    }

    #[test]
    fn bad_rows_are_all_reported() {
        let csv = "claim_id,verdict\ng1,true\ng2,false\ng3,maybe\ng4,sure\n";
        match ingest_verdicts(csv.as_bytes(), &gold()) {
            Err(VerdictIngestError::Format(errs)) => {
                assert_eq!(errs.iter().map(|e| e.row).collect::<Vec<_>>(), [3, 4]);
                assert!(errs[0].to_string().starts_with("row 3: invalid verdict `maybe`"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_ids_listed() {
        let csv = "claim_id,verdict\ng1,true\nzz,false\nyy,true\n";
        assert_eq!(
            ingest_verdicts(csv.as_bytes(), &gold()),
            Err(VerdictIngestError::UnknownClaim(vec!["zz".into(), "yy".into()]))
        );
    }

    #[test]
    fn header_rules() {
        for csv in [
            "id,verdict\n",
            "claim_id,verdict,notes\n",
            "claim_id\n",
            "claim_id,verdict,verdict\n",
        ] {
            assert!(
                matches!(
                    ingest_verdicts(csv.as_bytes(), &gold()),
                    Err(VerdictIngestError::Header(_))
                ),
                "{csv}"
            );
        }
        let csv = "verdict,claim_id\ntrue,g1\n";
        assert_eq!(ingest_verdicts(csv.as_bytes(), &gold()).unwrap().rows.len(), 1);
    }

    #[test]
    fn negative_cost_rejected() {
        let csv = "claim_id,verdict,cost_usd\ng1,true,-1\n";
        assert!(matches!(
            ingest_verdicts(csv.as_bytes(), &gold()),
            Err(VerdictIngestError::Format(_))
        ));
    }
}
