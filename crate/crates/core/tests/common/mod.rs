//! Property checks shared by `properties.rs` and the acceptance run.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use wifi_mode_detect::eval::{confusion, kfold_split, metrics, stratified_kfold};
use wifi_mode_detect::features::{fit_matrix, FeatureTable, FeatureVector, NUM_FEATURES};
use wifi_mode_detect::nn::{dropout_forward, softmax, Matrix, Phase};
use wifi_mode_detect::seed;
use wifi_mode_detect::trace::{
    assemble_trips, parse_log, read_trip_rows, reattach_trips, serialize_log, sessionize, write_trips,
    ConnectionRecord,
};
use wifi_mode_detect::TravelMode;

pub type PropResult = Result<(), TestCaseError>;

pub fn mode() -> impl Strategy<Value = TravelMode> {
    prop_oneof![Just(TravelMode::Walking), Just(TravelMode::Biking), Just(TravelMode::Driving)]
}

/// Records from a handful of devices and pods with millisecond timestamps
/// and integer or one-decimal RSSI.
pub fn records(max: usize) -> impl Strategy<Value = Vec<ConnectionRecord>> {
    let record = (0u8..5, -990i32..-10, 0u64..4_000_000, 1u8..5).prop_map(|(d, r, ms, p)| ConnectionRecord {
        device_id: format!("02:00:00:00:00:{d:02x}"),
        rssi: r as f64 / 10.0,
        timestamp: 1_497_535_200.0 + ms as f64 / 1000.0,
        pod_id: format!("P{p}"),
    });
    proptest::collection::vec(record, 0..max)
}

pub fn fold_case() -> impl Strategy<Value = (usize, usize, u64)> {
    (1usize..300).prop_flat_map(|n| (Just(n), 1..=n.min(12), any::<u64>()))
}

fn check_partition(folds: &[Vec<usize>], n: usize, k: usize) -> PropResult {
    prop_assert_eq!(folds.len(), k);
    let mut seen = vec![0u32; n];
    for f in folds {
        for &i in f {
            prop_assert!(i < n);
            seen[i] += 1;
        }
    }
    prop_assert!(seen.iter().all(|&c| c == 1), "not a partition");
    let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
    let spread = sizes.iter().max().unwrap() - sizes.iter().min().unwrap();
    prop_assert!(spread <= 1, "fold sizes {sizes:?}");
    Ok(())
}

pub fn folds_partition((n, k, s): (usize, usize, u64)) -> PropResult {
    let folds = kfold_split(n, k, s).unwrap();
    check_partition(&folds, n, k)?;
    prop_assert_eq!(folds, kfold_split(n, k, s).unwrap());
    Ok(())
}

pub fn stratified_folds_partition((labels, k, s): (Vec<TravelMode>, usize, u64)) -> PropResult {
    let k = k.min(labels.len()).max(1);
    let folds = stratified_kfold(&labels, k, s).unwrap();
    check_partition(&folds, labels.len(), k)?;
    for class in TravelMode::ALL {
        let per: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| labels[i] == class).count()).collect();
        let spread = per.iter().max().unwrap() - per.iter().min().unwrap();
        prop_assert!(spread <= 1, "{class} spread {per:?}");
    }
    Ok(())
}

pub fn log_round_trip(recs: Vec<ConnectionRecord>) -> PropResult {
    let text = serialize_log(&recs);
    let parsed = parse_log(&text);
    prop_assert!(parsed.errors.is_empty());
    prop_assert_eq!(&parsed.records, &recs);
    prop_assert_eq!(serialize_log(&parsed.records), text);
    Ok(())
}

pub fn sessions_cover_records(recs: Vec<ConnectionRecord>) -> PropResult {
    let visits = sessionize(&recs, 60.0).unwrap();
    let key = |r: &ConnectionRecord| (r.device_id.clone(), r.pod_id.clone(), r.timestamp.to_bits(), r.rssi.to_bits());
    let expected: BTreeSet<_> = recs.iter().map(key).collect();
    let mut got = BTreeMap::new();
    for v in &visits {
        prop_assert!(!v.records.is_empty());
        for r in &v.records {
            prop_assert_eq!((&r.device_id, &r.pod_id), (&v.device_id, &v.pod_id));
            *got.entry(key(r)).or_insert(0) += 1;
        }
    }
    prop_assert!(got.values().all(|&c| c == 1), "record in two visits");
    prop_assert_eq!(got.keys().cloned().collect::<BTreeSet<_>>(), expected);
    Ok(())
}

pub fn trips_round_trip(recs: Vec<ConnectionRecord>) -> PropResult {
    let visits = sessionize(&recs, 60.0).unwrap();
    let trips = assemble_trips(&visits, 1800.0).unwrap().trips;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trips.csv");
    write_trips(&trips, &path).unwrap();
    let rows = read_trip_rows(&path).unwrap();
    prop_assert_eq!(rows.len(), trips.len());
    let back = reattach_trips(&rows, &recs).unwrap();
    prop_assert_eq!(back, trips);
    Ok(())
}

pub fn feature_rows() -> impl Strategy<Value = Vec<(Vec<f64>, Option<TravelMode>)>> {
    let row = (proptest::collection::vec(-1e4f64..1e4, NUM_FEATURES), proptest::option::of(mode()));
    proptest::collection::vec(row, 1..40)
}

pub fn feature_csv_round_trip(rows: Vec<(Vec<f64>, Option<TravelMode>)>) -> PropResult {
    let mut table = FeatureTable::default();
    for (i, (v, label)) in rows.into_iter().enumerate() {
        let mut values = [0.0; NUM_FEATURES];
        values.copy_from_slice(&v);
        table.push(FeatureVector { trip_id: i, values }, label);
    }
    let back = FeatureTable::from_csv(&table.to_csv(), std::path::Path::new("mem")).unwrap();
    prop_assert_eq!(back, table);
    Ok(())
}

/// Fitted stats bound every training value, normalized training columns
/// span exactly [0, 1], degenerate columns map to 0 and unseen values
/// stay inside [0, 1].
pub fn normalization_range((rows, probe): (Vec<Vec<f64>>, Vec<f64>)) -> PropResult {
    let width = rows[0].len();
    let x = Matrix::from_rows(&rows).unwrap();
    let stats = fit_matrix(&x).unwrap();
    for row in &rows {
        for j in 0..width {
            prop_assert!(stats.min[j] <= row[j] && row[j] <= stats.max[j]);
        }
    }
    let normed: Vec<Vec<f64>> = rows.iter().map(|r| stats.apply(r)).collect();
    for j in 0..width {
        let col: Vec<f64> = normed.iter().map(|r| r[j]).collect();
        let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if stats.max[j] > stats.min[j] {
            prop_assert_eq!((lo, hi), (0.0, 1.0), "column {}", j);
        } else {
            prop_assert!(col.iter().all(|&v| v == 0.0));
        }
    }
    prop_assert!(stats.apply(&probe).iter().all(|v| (0.0..=1.0).contains(v)));
    Ok(())
}

pub fn normalization_case() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (1usize..6).prop_flat_map(|w| {
        let rows = proptest::collection::vec(
            proptest::collection::vec(prop_oneof![-1e3f64..1e3, Just(5.0)], w),
            1..30,
        );
        (rows, proptest::collection::vec(-1e4f64..1e4, w))
    })
}

pub fn logits() -> impl Strategy<Value = (Vec<[f64; 3]>, f64)> {
    (proptest::collection::vec(prop::array::uniform3(-50f64..50.0), 1..20), -100f64..100.0)
}

/// Rows sum to one, entries lie in [0, 1], the argmax is the logit argmax
/// and adding a constant to every logit leaves the probabilities unchanged.
pub fn softmax_properties((rows, shift): (Vec<[f64; 3]>, f64)) -> PropResult {
    let x = Matrix::from_rows(&rows).unwrap();
    let p = softmax(&x);
    for i in 0..rows.len() {
        let r = p.row(i);
        prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(r.iter().all(|v| (0.0..=1.0).contains(v)));
    }
    prop_assert_eq!(p.argmax_rows(), x.argmax_rows());
    let shifted: Vec<[f64; 3]> = rows.iter().map(|r| r.map(|v| v + shift)).collect();
    let q = softmax(&Matrix::from_rows(&shifted).unwrap());
    for (a, b) in p.data().iter().zip(q.data()) {
        prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
    Ok(())
}

pub const DROPOUT_SAMPLES: usize = 100_000;

/// Fraction of units kept over 10⁵ draws is within 0.01 of `1 - rate`.
pub fn dropout_keep_rate((rate, s): (f64, u64)) -> PropResult {
    let x = Matrix::from_vec(1, DROPOUT_SAMPLES, vec![1.0; DROPOUT_SAMPLES]).unwrap();
    let (y, _) = dropout_forward(&x, rate, Phase::Train, &mut seed::rng(s)).unwrap();
    let kept = y.data().iter().filter(|&&v| v != 0.0).count() as f64 / DROPOUT_SAMPLES as f64;
    prop_assert!((kept - (1.0 - rate)).abs() <= 0.01, "rate {rate}: kept {kept}");
    Ok(())
}

pub fn accuracy_is_match_rate((actual, predicted): (Vec<TravelMode>, Vec<TravelMode>)) -> PropResult {
    let n = actual.len().min(predicted.len());
    let (a, p) = (&actual[..n], &predicted[..n]);
    let report = metrics(&confusion(a, p).unwrap());
    if n == 0 {
        prop_assert!(report.accuracy.is_none());
    } else {
        let direct = 100.0 * a.iter().zip(p).filter(|(x, y)| x == y).count() as f64 / n as f64;
        prop_assert!((report.accuracy.unwrap() - direct).abs() < 1e-9);
    }
    Ok(())
}

/// Runs one property over `cases` generated inputs; returns the failure
/// message, if any.
pub fn run_property<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> PropResult,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

/// Every property with its default case count, by name.
pub fn all_properties() -> Vec<(&'static str, Result<(), String>)> {
    vec![
        ("fold partition", run_property(256, fold_case(), folds_partition)),
        (
            "stratified fold partition",
            run_property(128, (proptest::collection::vec(mode(), 1..200), 2usize..11, any::<u64>()), stratified_folds_partition),
        ),
        ("log parse/emit round trip", run_property(128, records(200), log_round_trip)),
        ("visits partition records", run_property(128, records(200), sessions_cover_records)),
        ("trip file round trip", run_property(64, records(300), trips_round_trip)),
        ("feature csv round trip", run_property(64, feature_rows(), feature_csv_round_trip)),
        ("normalization range", run_property(256, normalization_case(), normalization_range)),
        ("softmax normalization and argmax", run_property(256, logits(), softmax_properties)),
        ("dropout keep rate", run_property(16, (0.0f64..0.9, any::<u64>()), dropout_keep_rate)),
        (
            "accuracy equals match rate",
            run_property(
                256,
                (proptest::collection::vec(mode(), 0..100), proptest::collection::vec(mode(), 0..100)),
                accuracy_is_match_rate,
            ),
        ),
    ]
}
