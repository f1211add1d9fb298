//! Per-trip predictors and min-max normalization.
//!
//! Fifteen values are derived for every trip, grouped as time, connection and
//! signal-strength features. Slots (1-based, as in the CSV header):
//!
//! | slot | feature |
//! |------|---------|
//! | f1 | relative travel speed: gap distance / gap time (m/s) |
//! | f2 | gap travel time (s) |
//! | f3 | total trip duration, origin first to destination last (s) |
//! | f4, f5 | origin / destination dwell time (s) |
//! | f6 | dwell ratio f4 / (f5 + 1 s) |
//! | f7, f8 | origin / destination message count |
//! | f9 | total message count |
//! | f10, f11 | origin / destination RSSI population variance (dBm²) |
//! | f12, f13 | origin / destination mean absolute first derivative of RSSI (dBm/s) |
//! | f14, f15 | origin / destination mean absolute second derivative of RSSI (dBm/s²) |
//!
//! The exact choice of fifteen is an interpretation of three named feature
//! families; the registry above is fixed for every model this crate writes.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mode::TravelMode;
use crate::trace::{PodDeployment, PodVisit, Trip};

pub const NUM_FEATURES: usize = 15;

/// Added to the destination dwell in the dwell ratio.
pub const DWELL_RATIO_EPS_S: f64 = 1.0;

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "relative_speed",
    "gap_time",
    "trip_duration",
    "origin_dwell",
    "dest_dwell",
    "dwell_ratio",
    "origin_messages",
    "dest_messages",
    "total_messages",
    "origin_rssi_var",
    "dest_rssi_var",
    "origin_rssi_d1",
    "dest_rssi_d1",
    "origin_rssi_d2",
    "dest_rssi_d2",
];

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub trip_id: usize,
    pub values: [f64; NUM_FEATURES],
}

/// Output of [`extract_features`] for a single trip.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFeatures {
    pub vector: FeatureVector,
    /// Gap time was not positive; f1 holds 0 until [`extract_all`] substitutes
    /// the largest speed seen in the batch.
    pub degenerate_gap: bool,
}

/// RSSI statistics of one visit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalStats {
    pub variance: f64,
    pub mean_abs_d1: f64,
    pub mean_abs_d2: f64,
}

pub fn signal_stats(visit: &PodVisit) -> SignalStats {
    let n = visit.records.len() as f64;
    let mean = visit.records.iter().map(|r| r.rssi).sum::<f64>() / n;
    let variance = visit
        .records
        .iter()
        .map(|r| (r.rssi - mean).powi(2))
        .sum::<f64>()
        / n;

    // Collapse repeated timestamps to their mean RSSI.
    let mut samples: Vec<(f64, f64)> = visit
        .records
        .iter()
        .map(|r| (r.timestamp, r.rssi))
        .collect();
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut series: Vec<(f64, f64, usize)> = Vec::with_capacity(samples.len());
    for (t, r) in samples {
        match series.last_mut() {
            Some(last) if last.0 == t => {
                last.1 += r;
                last.2 += 1;
            }
            _ => series.push((t, r, 1)),
        }
    }
    let series: Vec<(f64, f64)> = series
        .into_iter()
        .map(|(t, sum, k)| (t, sum / k as f64))
        .collect();

    let d1: Vec<f64> = series
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect();
    let d2: Vec<f64> = (0..d1.len().saturating_sub(1))
        .map(|i| (d1[i + 1] - d1[i]) / ((series[i + 2].0 - series[i].0) / 2.0))
        .collect();
    let mean_abs = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().map(|x| x.abs()).sum::<f64>() / v.len() as f64
        }
    };
    SignalStats {
        variance,
        mean_abs_d1: mean_abs(&d1),
        mean_abs_d2: mean_abs(&d2),
    }
}

/// Computes the raw, unnormalized feature vector of one trip.
pub fn extract_features(trip: &Trip, deployment: &PodDeployment) -> Result<RawFeatures> {
    let (o, d) = (&trip.origin, &trip.destination);
    let gap_distance = deployment
        .gap_distance(&o.pod_id, &d.pod_id)
        .ok_or_else(|| Error::MissingGap(o.pod_id.clone(), d.pod_id.clone()))?;
    let gap_time = trip.gap_time();
    let degenerate_gap = !(gap_time > 0.0);
    let speed = if degenerate_gap { 0.0 } else { gap_distance / gap_time };

    let (os, ds) = (signal_stats(o), signal_stats(d));
    let (o_dwell, d_dwell) = (o.dwell(), d.dwell());
    let (o_msgs, d_msgs) = (o.message_count() as f64, d.message_count() as f64);
    let values = [
        speed,
        gap_time,
        d.t_last() - o.t_first(),
        o_dwell,
        d_dwell,
        o_dwell / (d_dwell + DWELL_RATIO_EPS_S),
        o_msgs,
        d_msgs,
        o_msgs + d_msgs,
        os.variance,
        ds.variance,
        os.mean_abs_d1,
        ds.mean_abs_d1,
        os.mean_abs_d2,
        ds.mean_abs_d2,
    ];
    Ok(RawFeatures {
        vector: FeatureVector {
            trip_id: trip.id,
            values,
        },
        degenerate_gap,
    })
}

/// Extracts features for a batch of trips. Degenerate-gap trips get the
/// largest relative speed observed among the others.
pub fn extract_all(trips: &[Trip], deployment: &PodDeployment) -> Result<Vec<FeatureVector>> {
    let raw: Vec<RawFeatures> = trips
        .iter()
        .map(|t| extract_features(t, deployment))
        .collect::<Result<_>>()?;
    let max_speed = raw
        .iter()
        .filter(|r| !r.degenerate_gap)
        .map(|r| r.vector.values[0])
        .fold(0.0_f64, f64::max);
    Ok(raw
        .into_iter()
        .map(|mut r| {
            if r.degenerate_gap {
                r.vector.values[0] = max_speed;
            }
            r.vector
        })
        .collect())
}

/// Per-feature minimum and maximum fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormalizationStats {
    /// Stats that leave every value in place (min 0, max 1).
    pub fn identity() -> Self {
        NormalizationStats {
            min: vec![0.0; NUM_FEATURES],
            max: vec![1.0; NUM_FEATURES],
        }
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| {
                if hi == lo {
                    0.0
                } else {
                    ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
                }
            })
            .collect()
    }
}

pub fn fit_normalizer(features: &[FeatureVector]) -> Result<NormalizationStats> {
    fit_rows(features.iter().map(|f| &f.values[..]))
}

/// Fits per-column stats on the rows of a raw feature matrix.
pub fn fit_matrix(x: &crate::nn::Matrix) -> Result<NormalizationStats> {
    fit_rows((0..x.rows()).map(|i| x.row(i)))
}

pub(crate) fn fit_rows<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<NormalizationStats> {
    let mut min = Vec::new();
    let mut max = Vec::new();
    let mut seen = false;
    for row in rows {
        if !seen {
            min = vec![f64::INFINITY; row.len()];
            max = vec![f64::NEG_INFINITY; row.len()];
        }
        seen = true;
        for (j, &v) in row.iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    if !seen {
        return Err(Error::EmptyDataset);
    }
    Ok(NormalizationStats { min, max })
}

/// Maps each value to `(v - min) / (max - min)`, clipped to `[0, 1]`;
/// degenerate columns map to 0.
pub fn apply_normalizer(fv: &FeatureVector, stats: &NormalizationStats) -> FeatureVector {
    let mut values = [0.0; NUM_FEATURES];
    values.copy_from_slice(&stats.apply(&fv.values));
    FeatureVector {
        trip_id: fv.trip_id,
        values,
    }
}

/// Feature rows with optional labels, as stored in the feature CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    pub rows: Vec<FeatureVector>,
    pub labels: Vec<Option<TravelMode>>,
}

impl FeatureTable {
    pub fn push(&mut self, fv: FeatureVector, label: Option<TravelMode>) {
        self.rows.push(fv);
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Splits into (labelled rows, their labels) and unlabelled rows.
    pub fn split_labelled(&self) -> (Vec<FeatureVector>, Vec<TravelMode>, Vec<FeatureVector>) {
        let mut lab = Vec::new();
        let mut labels = Vec::new();
        let mut unlab = Vec::new();
        for (fv, label) in self.rows.iter().zip(&self.labels) {
            match label {
                Some(m) => {
                    lab.push(fv.clone());
                    labels.push(*m);
                }
                None => unlab.push(fv.clone()),
            }
        }
        (lab, labels, unlab)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("trip_id");
        for j in 1..=NUM_FEATURES {
            let _ = write!(out, ",f{j}");
        }
        out.push_str(",label\n");
        for (fv, label) in self.rows.iter().zip(&self.labels) {
            let _ = write!(out, "{}", fv.trip_id);
            for v in fv.values {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{}", label.map(TravelMode::code).unwrap_or(""));
        }
        out
    }

    pub fn from_csv(raw: &str, path: &Path) -> Result<Self> {
        let mut table = FeatureTable::default();
        for (idx, line) in raw.lines().enumerate() {
            if line.trim().is_empty() || (idx == 0 && line.starts_with("trip_id")) {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message,
            };
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != NUM_FEATURES + 2 {
                return Err(err(format!("expected {} fields", NUM_FEATURES + 2)));
            }
            let trip_id = f[0].parse().map_err(|_| err("bad trip id".into()))?;
            let mut values = [0.0; NUM_FEATURES];
            for (j, slot) in values.iter_mut().enumerate() {
                let v: f64 = f[j + 1]
                    .parse()
                    .map_err(|_| err(format!("bad value {:?}", f[j + 1])))?;
                *slot = v;
                if !v.is_finite() {
                    return Err(err(format!("non-finite f{}", j + 1)));
                }
            }
            let label = match f[NUM_FEATURES + 1] {
                "" => None,
                s => Some(s.parse().map_err(|e: Error| err(e.to_string()))?),
            };
            table.push(FeatureVector { trip_id, values }, label);
        }
        Ok(table)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&raw, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{ConnectionRecord, GapEntry, Pod};

    fn visit(pod: &str, samples: &[(f64, f64)]) -> PodVisit {
        PodVisit {
            device_id: "d".into(),
            pod_id: pod.into(),
            records: samples
                .iter()
                .map(|&(t, rssi)| ConnectionRecord {
                    device_id: "d".into(),
                    rssi,
                    timestamp: t,
                    pod_id: pod.into(),
                })
                .collect(),
        }
    }

    fn deployment(gap: f64) -> PodDeployment {
        PodDeployment {
            pods: vec![
                Pod { id: "A".into(), x_m: 0.0, y_m: 0.0, radius_m: 50.0 },
                Pod { id: "B".into(), x_m: 500.0, y_m: 0.0, radius_m: 50.0 },
            ],
            gaps: vec![GapEntry { from: "A".into(), to: "B".into(), distance_m: gap }],
        }
    }

    fn trip(origin: PodVisit, destination: PodVisit) -> Trip {
        Trip { id: 7, device_id: "d".into(), origin, destination, label: None }
    }

    #[test]
    fn unit_speed() {
        let t = trip(visit("A", &[(0.0, -60.0)]), visit("B", &[(100.0, -60.0)]));
        let f = extract_features(&t, &deployment(100.0)).unwrap();
        assert_eq!(f.vector.values[0], 1.0);
        assert_eq!(f.vector.values[1], 100.0);
        assert!(!f.degenerate_gap);
    }

    #[test]
    fn constant_signal() {
        let flat: Vec<_> = (0..5).map(|i| (i as f64, -60.0)).collect();
        let s = signal_stats(&visit("A", &flat));
        assert_eq!(s, SignalStats { variance: 0.0, mean_abs_d1: 0.0, mean_abs_d2: 0.0 });
    }

    #[test]
    fn linear_ramp_derivatives() {
        let s = signal_stats(&visit("A", &[(0.0, -70.0), (1.0, -60.0), (2.0, -50.0)]));
        assert!((s.variance - 200.0 / 3.0).abs() < 1e-12);
        assert!((s.mean_abs_d1 - 10.0).abs() < 1e-12);
        assert!(s.mean_abs_d2.abs() < 1e-12);
    }

    #[test]
    fn short_visits_have_zero_derivatives() {
        let s = signal_stats(&visit("A", &[(0.0, -70.0)]));
        assert_eq!((s.mean_abs_d1, s.mean_abs_d2), (0.0, 0.0));
        let s = signal_stats(&visit("A", &[(0.0, -70.0), (2.0, -50.0)]));
        assert_eq!((s.mean_abs_d1, s.mean_abs_d2), (10.0, 0.0));
        // repeated timestamps collapse to one sample
        let s = signal_stats(&visit("A", &[(0.0, -70.0), (0.0, -50.0), (1.0, -60.0)]));
        assert_eq!((s.mean_abs_d1, s.mean_abs_d2), (0.0, 0.0));
    }

    #[test]
    fn full_registry() {
        let t = trip(
            visit("A", &[(0.0, -70.0), (10.0, -60.0), (20.0, -50.0)]),
            visit("B", &[(70.0, -55.0), (75.0, -65.0)]),
        );
        let v = extract_features(&t, &deployment(100.0)).unwrap().vector.values;
        assert_eq!(v[0], 2.0);
        assert_eq!(v[1], 50.0);
        assert_eq!(v[2], 75.0);
        assert_eq!((v[3], v[4]), (20.0, 5.0));
        assert_eq!(v[5], 20.0 / 6.0);
        assert_eq!((v[6], v[7], v[8]), (3.0, 2.0, 5.0));
        assert_eq!(v[10], 25.0);
        assert_eq!((v[11], v[12]), (1.0, 2.0));
        assert_eq!((v[13], v[14]), (0.0, 0.0));
    }

    #[test]
    fn missing_gap_names_pods() {
        let t = trip(visit("A", &[(0.0, -60.0)]), visit("C", &[(10.0, -60.0)]));
        match extract_features(&t, &deployment(100.0)) {
            Err(Error::MissingGap(a, c)) => assert_eq!((a.as_str(), c.as_str()), ("A", "C")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn degenerate_gap_takes_batch_max_speed() {
        let good = trip(visit("A", &[(0.0, -60.0)]), visit("B", &[(25.0, -60.0)]));
        let mut bad = trip(visit("A", &[(0.0, -60.0), (30.0, -61.0)]), visit("B", &[(30.0, -60.0)]));
        bad.id = 8;
        let raw = extract_features(&bad, &deployment(100.0)).unwrap();
        assert!(raw.degenerate_gap);
        let all = extract_all(&[good, bad], &deployment(100.0)).unwrap();
        assert_eq!(all[1].values[0], 4.0);
    }

    #[test]
    fn normalizer_edges() {
        let mut a = FeatureVector { trip_id: 0, values: [0.0; NUM_FEATURES] };
        let single = fit_normalizer(std::slice::from_ref(&a)).unwrap();
        assert_eq!(single.min, single.max);
        assert_eq!(apply_normalizer(&a, &single).values, [0.0; NUM_FEATURES]);

        let mut b = a.clone();
        b.values[0] = 2.0;
        let stats = fit_normalizer(&[a.clone(), b.clone()]).unwrap();
        assert_eq!((stats.min[0], stats.max[0]), (0.0, 2.0));
        assert_eq!(apply_normalizer(&a, &stats).values[0], 0.0);
        assert_eq!(apply_normalizer(&b, &stats).values[0], 1.0);
        a.values[0] = 5.0;
        assert_eq!(apply_normalizer(&a, &stats).values[0], 1.0);
        a.values[0] = -1.0;
        assert_eq!(apply_normalizer(&a, &stats).values[0], 0.0);
        assert!(fit_normalizer(&[]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut table = FeatureTable::default();
        let mut v = [0.0; NUM_FEATURES];
        v[3] = 0.1 + 0.2;
        table.push(FeatureVector { trip_id: 3, values: v }, Some(TravelMode::Biking));
        table.push(FeatureVector { trip_id: 4, values: [1.5; NUM_FEATURES] }, None);
        let back = FeatureTable::from_csv(&table.to_csv(), Path::new("x")).unwrap();
        assert_eq!(back, table);
    }
}
