//! Count contracts of the question manifest and the verification gold set.

mod common;

use common::*;
use factcheck::checker_eval::{read_factbench, GoldLoadError};
use factcheck::core::checker::{validate_gold, Dataset, GoldError, LabelCounts};
use factcheck::core::llm_eval::{domain_distribution, DatasetManifest, ManifestError, Subset};
use factcheck::core::Label;
use factcheck::jsonl::write_with_header;
use factcheck::llm_eval::{read_manifest, ManifestLoadError};

#[test]
fn published_subset_sizes_add_up() {
    let sum: usize = FACTQA_SIZES.iter().map(|(_, n)| n).sum();
    assert_eq!(sum, FACTQA_TOTAL);
    let manifest = DatasetManifest::new(
        factqa_header(&FACTQA_SIZES, Some(FACTQA_TOTAL)),
        factqa_records(&FACTQA_SIZES),
    )
    .unwrap();
    assert_eq!(manifest.records.len(), 6480);
}

#[test]
fn one_row_off_in_any_subset_names_that_subset() {
    for (k, &(subset, n)) in FACTQA_SIZES.iter().enumerate() {
        for delta in [-1i64, 1] {
            let mut sizes = FACTQA_SIZES;
            sizes[k].1 = (n as i64 + delta) as usize;
            let err = DatasetManifest::new(factqa_header(&FACTQA_SIZES, Some(FACTQA_TOTAL)), factqa_records(&sizes))
                .unwrap_err();
            assert_eq!(
                err,
                ManifestError::Count {
                    subset,
                    declared: n,
                    found: sizes[k].1
                }
            );
        }
    }
}

#[test]
fn short_factool_subset_is_reported_with_counts() {
    let mut sizes = FACTQA_SIZES;
    sizes[3].1 = 49;
    let err = DatasetManifest::new(factqa_header(&FACTQA_SIZES, None), factqa_records(&sizes)).unwrap_err();
    assert_eq!(err.to_string(), "subset factoolqa: declared 50 records, found 49");
}

#[test]
fn declared_total_must_match() {
    let err =
        DatasetManifest::new(factqa_header(&FACTQA_SIZES, Some(6481)), factqa_records(&FACTQA_SIZES)).unwrap_err();
    assert!(matches!(
        err,
        ManifestError::Total {
            declared: 6481,
            found: 6480
        }
    ));
}

#[test]
fn manifest_round_trips_through_jsonl() {
    let sizes = [(Subset::Snowballing, 2), (Subset::FreshQa, 1)];
    let text = write_with_header(&factqa_header(&sizes, Some(3)), &factqa_records(&sizes));
    let m = read_manifest(text.as_bytes()).unwrap();
    assert_eq!(m.records.len(), 3);
    let bad = text.replace("\"snowballing\":2", "\"snowballing\":3");
    assert!(matches!(
        read_manifest(bad.as_bytes()),
        Err(ManifestLoadError::Invalid(ManifestError::Count {
            subset: Subset::Snowballing,
            ..
        }))
    ));
}

/// Top twenty domains as published, largest first.
const TOP_DOMAINS: [(&str, usize); 20] = [
    ("History", 771),
    ("Biography", 683),
    ("Mathematics", 612),
    ("Transportation", 519),
    ("Biology", 259),
    ("Philosophy", 229),
    ("Technology", 208),
    ("Entertainment", 191),
    ("Psychology", 169),
    ("Sports", 157),
    ("Science", 143),
    ("Physics", 136),
    ("Social Sciences", 111),
    ("Literature", 100),
    ("Geography", 87),
    ("Astronomy", 82),
    ("Economics", 69),
    ("Music", 66),
    ("Religion", 63),
    ("General Knowledge", 53),
];

#[test]
fn domain_distribution_recovers_the_top_twenty() {
    let top_sum: usize = TOP_DOMAINS.iter().map(|(_, n)| n).sum();
    // the listed rows add to 4708; the published total line reads 4523
    assert_eq!(top_sum, 4708);

    // 462 filler domains share the rest, each far below the smallest listed one
    let mut domains: Vec<String> = Vec::new();
    for (d, n) in TOP_DOMAINS {
        domains.extend(std::iter::repeat_n(d.to_string(), n));
    }
    let rest = FACTQA_TOTAL - top_sum;
    domains.extend((0..rest).map(|i| format!("Other {:03}", i % 462)));
    let mut records = factqa_records(&FACTQA_SIZES);
    for (r, d) in records.iter_mut().zip(&domains) {
        r.domain = d.clone();
    }
    DatasetManifest::new(factqa_header(&FACTQA_SIZES, Some(FACTQA_TOTAL)), records.clone()).unwrap();

    let dist = domain_distribution(&records);
    assert_eq!(dist.len(), 482);
    let top: Vec<(&str, usize)> = dist[..20].iter().map(|d| (d.domain.as_str(), d.count)).collect();
    assert_eq!(top, TOP_DOMAINS);
    assert!(dist[20].count < 53);
    assert_eq!(dist.iter().map(|d| d.count).sum::<usize>(), FACTQA_TOTAL);
}

#[test]
fn published_gold_counts_add_up() {
    let totals: Vec<usize> = FACTBENCH_COUNTS.iter().map(|(_, c)| c.total).collect();
    assert_eq!(totals, [233, 532, 678, 4507]);
    let records = gold_records(&FACTBENCH_COUNTS);
    assert_eq!(records.len(), 5950);
    validate_gold(&gold_header(&FACTBENCH_COUNTS), &records).unwrap();
}

fn count_error_dataset(records: &[factcheck::core::checker::GoldRecord]) -> Dataset {
    match validate_gold(&gold_header(&FACTBENCH_COUNTS), records) {
        Err(GoldError::Count { dataset, .. }) => dataset,
        other => panic!("expected a count error, got {other:?}"),
    }
}

fn flip(l: Label) -> Label {
    match l {
        Label::True => Label::False,
        Label::False => Label::Unknown,
        Label::Unknown => Label::True,
    }
}

#[test]
fn every_single_row_perturbation_names_its_dataset() {
    let base = gold_records(&FACTBENCH_COUNTS);
    let mut checked = 0;
    for (dataset, _) in FACTBENCH_COUNTS {
        let idx: Vec<usize> = (0..base.len()).filter(|&i| base[i].dataset == dataset).collect();
        // one row of each label present, plus the first and last rows
        let mut picks = vec![idx[0], *idx.last().unwrap()];
        for l in [Label::True, Label::False, Label::Unknown] {
            picks.extend(idx.iter().copied().find(|&i| base[i].label == l));
        }
        for &i in &picks {
            let mut dropped = base.clone();
            dropped.remove(i);
            assert_eq!(count_error_dataset(&dropped), dataset);

            for l in [Label::True, Label::False, Label::Unknown] {
                let mut added = base.clone();
                added.push(gold_record("extra", dataset, l));
                assert_eq!(count_error_dataset(&added), dataset);
            }

            let mut relabelled = base.clone();
            relabelled[i].label = flip(relabelled[i].label);
            assert_eq!(count_error_dataset(&relabelled), dataset);
            relabelled[i].label = flip(relabelled[i].label);
            assert_eq!(count_error_dataset(&relabelled), dataset);
            checked += 1;
        }
    }
    assert!(checked >= 4 * 4);
}

#[test]
fn forty_six_unknowns_in_factcheck_bench_is_rejected() {
    let mut counts = FACTBENCH_COUNTS;
    counts[2].1 = LabelCounts::new(472, 159, 46);
    let err = validate_gold(&gold_header(&FACTBENCH_COUNTS), &gold_records(&counts)).unwrap_err();
    assert_eq!(
        err,
        GoldError::Count {
            dataset: Dataset::FactcheckBench,
            declared: LabelCounts::new(472, 159, 47),
            found: LabelCounts::new(472, 159, 46),
        }
    );
}

#[test]
fn inconsistent_header_total_is_a_schema_error() {
    let mut header = gold_header(&FACTBENCH_COUNTS);
    header.declared_counts.get_mut(&Dataset::FelmWk).unwrap().total = 533;
    assert!(matches!(
        validate_gold(&header, &gold_records(&FACTBENCH_COUNTS)),
        Err(GoldError::Schema(_))
    ));
}

#[test]
fn small_gold_file_loads() {
    let counts = [
        (Dataset::FacToolQa, LabelCounts::new(1, 1, 0)),
        (Dataset::FactcheckBench, LabelCounts::new(1, 1, 1)),
        (Dataset::HaluEval, LabelCounts::new(0, 1, 0)),
    ];
    let text = write_with_header(&gold_header(&counts), &gold_records(&counts));
    let gold = read_factbench(text.as_bytes()).unwrap();
    assert_eq!(gold.records.len(), 6);
    let json = serde_json::to_value(&gold.header).unwrap();
    assert_eq!(
        json["declared_counts"]["factcheck-bench"],
        serde_json::json!({"true": 1, "false": 1, "unknown": 1, "total": 3})
    );

    let short = text.lines().take(6).collect::<Vec<_>>().join("\n");
    assert!(matches!(
        read_factbench(short.as_bytes()),
        Err(GoldLoadError::Invalid(GoldError::Count {
            dataset: Dataset::HaluEval,
            ..
        }))
    ));
}
