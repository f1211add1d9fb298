mod common;

use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn kfold_is_a_balanced_partition(case in fold_case()) {
        folds_partition(case)?;
    }

    #[test]
    fn stratified_kfold_is_balanced_per_class(
        labels in proptest::collection::vec(mode(), 1..200),
        k in 2usize..11,
        s in any::<u64>(),
    ) {
        stratified_folds_partition((labels, k, s))?;
    }

    #[test]
    fn log_text_round_trips(recs in records(200)) {
        log_round_trip(recs)?;
    }

    #[test]
    fn every_record_lands_in_one_visit(recs in records(200)) {
        sessions_cover_records(recs)?;
    }

    #[test]
    fn normalized_training_columns_span_unit_interval(case in normalization_case()) {
        normalization_range(case)?;
    }

    #[test]
    fn softmax_rows_are_distributions(case in logits()) {
        softmax_properties(case)?;
    }

    #[test]
    fn accuracy_matches_direct_count(
        a in proptest::collection::vec(mode(), 0..100),
        p in proptest::collection::vec(mode(), 0..100),
    ) {
        accuracy_is_match_rate((a, p))?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn trip_file_round_trips(recs in records(300)) {
        trips_round_trip(recs)?;
    }

    #[test]
    fn feature_csv_round_trips(rows in feature_rows()) {
        feature_csv_round_trip(rows)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn dropout_keeps_expected_fraction(rate in 0.0f64..0.9, s in any::<u64>()) {
        dropout_keep_rate((rate, s))?;
    }
}
