mod common;

use chrono::{NaiveDate, TimeZone, Utc};
use common::*;
use flowgate_core::dataset::ColumnarTable;
use flowgate_core::ingest::{
    epoch_seconds, preprocess_raw, stratified_split, train_quota, DatasetProfile, FitScope, PipelineOptions,
};
use flowgate_core::synth::{corrupt, generate_flows, CorruptionSpec, SynthSpec};
use proptest::prelude::*;

fn sorted_rows(t: &ColumnarTable, skip: &[usize]) -> Vec<Vec<u64>> {
    let mut rows: Vec<Vec<u64>> = (0..t.n_rows())
        .filter(|r| skip.binary_search(r).is_err())
        .map(|r| {
            let mut key: Vec<u64> = t.row(r).iter().map(|v| v.to_bits()).collect();
            key.push(u64::from(t.labels()[r]));
            key
        })
        .collect();
    rows.sort();
    rows
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn epoch_seconds_agrees_with_chrono(
        year in 1900i64..2100, month in 1i64..=12, day in 1i64..=31,
        hour in 0i64..24, minute in 0i64..60, second in 0i64..60,
    ) {
        let date = NaiveDate::from_ymd_opt(year as i32, month as u32, day as u32);
        let ours = epoch_seconds(year, month, day, hour, minute, second);
        match date {
            Some(date) => {
                let dt = Utc.from_utc_datetime(&date.and_hms_opt(hour as u32, minute as u32, second as u32).unwrap());
                prop_assert_eq!(ours.unwrap(), dt.timestamp());
            }
            None => prop_assert!(ours.is_err()),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cleaning_recovers_exactly_the_uncorrupted_rows(
        seed in any::<u64>(),
        n in 300usize..1500,
        dup in 0.0f64..0.2,
        nan in 0.0f64..0.05,
        inf in 0.0f64..0.05,
        constant in 0usize..3,
    ) {
        let classes = ["benign", "scan", "flood"];
        let clean = generate_flows(&SynthSpec::from_counts(n, &classes, &[6, 3, 1], seed)).unwrap();
        let spec = CorruptionSpec { dup_rate: dup, nan_rate: nan, inf_rate: inf, n_constant_cols: constant, seed };
        let (raw, ledger) = corrupt(&clean, &spec).unwrap();
        let profile = DatasetProfile::synthetic("props", classes.iter().map(|c| c.to_string()).collect());
        let prepared = preprocess_raw(&raw, &profile, &PipelineOptions { seed, ..PipelineOptions::default() }).unwrap();

        let report = &prepared.report;
        prop_assert_eq!(report.stage("drop_invalid_rows").unwrap().rows_removed(), ledger.invalid_rows().len());
        prop_assert_eq!(report.stage("drop_duplicate_rows").unwrap().rows_removed(), ledger.duplicates.len());
        prop_assert_eq!(&report.stage("drop_zero_variance_columns").unwrap().removed_columns, &ledger.constant_columns);
        prop_assert_eq!(
            sorted_rows(&prepared.cleaned, &[]),
            sorted_rows(&clean, &ledger.invalid_rows())
        );
        for stage in report.stages.windows(2) {
            prop_assert_eq!(stage[0].rows_after, stage[1].rows_before);
        }
    }

    #[test]
    fn stratified_split_is_a_per_class_partition(seed in any::<u64>(), n in 50usize..2000, ratio in 0.05f64..0.95) {
        let spec = SynthSpec::from_counts(n, &["a", "b", "c", "d", "e"], &[50, 20, 15, 10, 5], seed);
        let t = generate_flows(&spec).unwrap();
        let split = stratified_split(&t, ratio, seed).unwrap();
        let mut all: Vec<usize> = split.train_rows.iter().chain(&split.test_rows).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..t.n_rows()).collect::<Vec<_>>());
        for (c, &total) in t.encoding().counts().iter().enumerate() {
            let train = split.train.labels().iter().filter(|&&y| y as usize == c).count();
            prop_assert_eq!(train, train_quota(total as usize, ratio));
            prop_assert!((train as f64 - ratio * total as f64).abs() <= 1.0);
        }
        let again = stratified_split(&t, ratio, seed).unwrap();
        prop_assert_eq!(again.train_rows, split.train_rows);
    }

    #[test]
    fn normalized_features_land_in_unit_interval(seed in any::<u64>(), scope in prop_oneof![Just(FitScope::FullDataset), Just(FitScope::TrainOnly)]) {
        let raw = flowgate_core::synth::to_raw(&generate_flows(&SynthSpec::cse2018(800, seed)).unwrap()).unwrap();
        let profile = DatasetProfile::builtin("synth-cse2018").unwrap();
        let prepared = preprocess_raw(&raw, &profile, &PipelineOptions { seed, fit_scope: scope, ..PipelineOptions::default() }).unwrap();
        for col in prepared.split.train.features() {
            prop_assert!(col.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        if scope == FitScope::FullDataset {
            for col in prepared.split.test.features() {
                prop_assert!(col.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }
}

#[test]
fn conflict_free_generator_is_conflict_free() {
    let t = conflict_free_table(&mut rng(1), 400, 2, 3);
    let mut seen = std::collections::HashMap::new();
    for r in 0..t.n_rows() {
        let key: Vec<u64> = t.row(r).iter().map(|v| v.to_bits()).collect();
        assert_eq!(*seen.entry(key).or_insert(t.labels()[r]), t.labels()[r]);
    }
}
