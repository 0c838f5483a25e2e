//! Scoring submitted verdict files and local pipelines against gold labels.

mod common;

use std::time::Instant;

use common::*;
use factcheck::checker_eval::{
    ingest_verdicts, read_factbench, run_local_checker, score_submission, GoldSet, VerdictIngestError,
};
use factcheck::core::checker::{Dataset, Granularity, LabelCounts};
use factcheck::core::{Label, ZeroClock};
use factcheck::jsonl::write_with_header;

fn gold_set(counts: &[(Dataset, LabelCounts)]) -> GoldSet {
    let text = write_with_header(&gold_header(counts), &gold_records(counts));
    read_factbench(text.as_bytes()).unwrap()
}

const FOUR: [(Dataset, LabelCounts); 1] = [(Dataset::FacToolQa, LabelCounts::new(2, 2, 0))];

#[test]
fn hand_computed_four_row_submission() {
    // gold T,T,F,F in id order
    let gold = gold_set(&FOUR);
    let csv = "claim_id,verdict,time_s,cost_usd\n\
               factool-qa-0,true,0.5,0.01\n\
               factool-qa-1,False,0.25,0.02\n\
               factool-qa-2,FALSE,,\n\
               factool-qa-3,false,1,0\n";
    let ingested = ingest_verdicts(csv.as_bytes(), &gold).unwrap();
    let m = score_submission(&ingested.rows).unwrap();
    assert_eq!(m.accuracy, 0.75);
    assert_eq!(m.true_class.precision, 1.0);
    assert_eq!(m.true_class.recall, 0.5);
    assert!((m.true_class.f1 - 2.0 / 3.0).abs() < 1e-9);
    assert!((m.false_class.precision - 2.0 / 3.0).abs() < 1e-9);
    assert_eq!(m.false_class.recall, 1.0);
    assert!((m.false_class.f1 - 0.8).abs() < 1e-9);
    assert!((m.macro_f1 - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-9);
    assert_eq!(m.confusion, [[1, 1, 0], [0, 2, 0], [0, 0, 0]]);
    assert!((m.total_time_seconds - 1.75).abs() < 1e-12);
    assert!((m.total_cost_usd - 0.03).abs() < 1e-12);
}

#[test]
fn columns_may_come_in_any_order() {
    let gold = gold_set(&FOUR);
    let csv = "cost_usd,verdict,claim_id\n0.1,true,factool-qa-0\n0.2,unknown,factool-qa-2\n";
    let ingested = ingest_verdicts(csv.as_bytes(), &gold).unwrap();
    assert_eq!(ingested.rows.len(), 2);
    assert_eq!(ingested.rows[1].predicted, Label::Unknown);
    assert_eq!(ingested.missing, ["factool-qa-1", "factool-qa-3"]);
    let m = score_submission(&ingested.rows).unwrap();
    // an abstention on binary gold is a miss
    assert_eq!(m.accuracy, 0.5);
    assert_eq!(m.confusion[1][2], 1);
}

#[test]
fn every_bad_row_is_reported_before_unknown_ids() {
    let gold = gold_set(&FOUR);
    let csv = "claim_id,verdict,time_s\n\
               factool-qa-0,maybe,0\n\
               nope,true,0\n\
               factool-qa-1,true,-1\n\
               factool-qa-2,true,0\n\
               factool-qa-2,false,0\n";
    match ingest_verdicts(csv.as_bytes(), &gold).unwrap_err() {
        VerdictIngestError::Format(errors) => {
            let rows: Vec<usize> = errors.iter().map(|e| e.row).collect();
            assert_eq!(rows, [1, 3, 5]);
            assert!(errors[0].message.contains("maybe"));
        }
        other => panic!("{other:?}"),
    }
    let csv = "claim_id,verdict\nnope,true\nfactool-qa-0,true\nzip,false\n";
    assert_eq!(
        ingest_verdicts(csv.as_bytes(), &gold).unwrap_err(),
        VerdictIngestError::UnknownClaim(vec!["nope".into(), "zip".into()])
    );
}

#[test]
fn header_must_name_id_and_verdict_once() {
    let gold = gold_set(&FOUR);
    for header in [
        "id,verdict",
        "claim_id,verdict,notes",
        "claim_id,verdict,verdict",
        "claim_id",
    ] {
        let csv = format!("{header}\n");
        assert!(
            matches!(
                ingest_verdicts(csv.as_bytes(), &gold),
                Err(VerdictIngestError::Header(_))
            ),
            "{header}"
        );
    }
}

#[test]
fn controversial_is_not_a_label() {
    let gold = gold_set(&FOUR);
    let csv = "claim_id,verdict\nfactool-qa-0,controversial\n";
    assert!(matches!(
        ingest_verdicts(csv.as_bytes(), &gold),
        Err(VerdictIngestError::Format(_))
    ));
}

#[test]
fn ten_thousand_rows_score_quickly() {
    let counts = [
        (Dataset::FelmWk, LabelCounts::new(3000, 2000, 0)),
        (Dataset::FactcheckBench, LabelCounts::new(2000, 2000, 1000)),
    ];
    let gold = gold_set(&counts);
    let mut rng = seeded_rng(7);
    let mut csv = String::from("claim_id,verdict,time_s,cost_usd\n");
    use rand::Rng;
    for r in &gold.records {
        let v = ["true", "false", "unknown"][rng.random_range(0..3)];
        csv += &format!("{},{v},0.001,0.0001\n", r.id);
    }
    let started = Instant::now();
    let ingested = ingest_verdicts(csv.as_bytes(), &gold).unwrap();
    let m = score_submission(&ingested.rows).unwrap();
    assert!(started.elapsed().as_secs_f64() < 5.0);
    assert_eq!(m.n, 10_000);
    assert_eq!(m.n_unknown_gold, 1000);
    assert_eq!(m.confusion.iter().flatten().sum::<usize>(), 10_000);
}

#[test]
fn local_pipeline_reproduces_fixture_gold() {
    let mut records = vec![
        gold_record("p", Dataset::FacToolQa, Label::True),
        gold_record("w", Dataset::FacToolQa, Label::False),
        gold_record("d", Dataset::HaluEval, Label::False),
    ];
    records[0].text = CLAIM_PARIS.into();
    records[1].text = CLAIM_WALL.into();
    records[2].text = DOC.into();
    assert_eq!(records[2].granularity, Granularity::Document);
    let checker = offline_checker();
    let joined = run_local_checker(&records, &checker.config, &checker.registry, &ZeroClock);
    let predicted: Vec<Label> = joined.iter().map(|j| j.predicted).collect();
    assert_eq!(predicted, [Label::True, Label::False, Label::False]);
    let m = score_submission(&joined).unwrap();
    assert_eq!(m.accuracy, 1.0);
    assert_eq!(m.macro_f1, 1.0);
}
