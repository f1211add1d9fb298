use std::collections::BTreeMap;

use super::{ConnectionRecord, PodVisit, Trip};
use crate::error::{Error, Result};
use crate::trace::Roster;

pub const DEFAULT_IDLE_GAP_S: f64 = 120.0;
pub const DEFAULT_MAX_TRIP_DURATION_S: f64 = 1800.0;

/// Groups records into pod visits.
///
/// Records are deduplicated, then scanned per device in time order. A visit
/// ends when the next record comes from a different pod or arrives more than
/// `idle_gap_s` after the previous one. Output is ordered by device, then
/// `t_first`.
pub fn sessionize(records: &[ConnectionRecord], idle_gap_s: f64) -> Result<Vec<PodVisit>> {
    if !(idle_gap_s > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "idle gap must be positive, got {idle_gap_s}"
        )));
    }
    let mut by_device: BTreeMap<&str, Vec<&ConnectionRecord>> = BTreeMap::new();
    for r in records {
        by_device.entry(r.device_id.as_str()).or_default().push(r);
    }

    let mut visits = Vec::new();
    for (_, mut recs) in by_device {
        recs.sort_by(|a, b| {
            a.timestamp
                .total_cmp(&b.timestamp)
                .then_with(|| a.pod_id.cmp(&b.pod_id))
                .then_with(|| a.rssi.total_cmp(&b.rssi))
        });
        recs.dedup_by(|b, a| a.pod_id == b.pod_id && a.timestamp == b.timestamp && a.rssi == b.rssi);

        let mut current: Option<PodVisit> = None;
        for r in recs {
            let continues = current.as_ref().is_some_and(|v| {
                v.pod_id == r.pod_id && r.timestamp - v.t_last() <= idle_gap_s
            });
            if continues {
                current.as_mut().unwrap().records.push(r.clone());
            } else {
                visits.extend(current.take());
                current = Some(PodVisit {
                    device_id: r.device_id.clone(),
                    pod_id: r.pod_id.clone(),
                    records: vec![r.clone()],
                });
            }
        }
        visits.extend(current);
    }
    Ok(visits)
}

/// Consecutive visit pairs that did not become trips.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DiscardReport {
    pub same_pod: usize,
    pub non_positive_gap: usize,
    pub too_long: usize,
}

impl DiscardReport {
    pub fn total(&self) -> usize {
        self.same_pod + self.non_positive_gap + self.too_long
    }
}

#[derive(Debug, Clone, Default)]
pub struct TripAssembly {
    pub trips: Vec<Trip>,
    pub discarded: DiscardReport,
    /// Number of consecutive visit pairs examined.
    pub candidates: usize,
}

/// Pairs each device's consecutive visits into trips.
///
/// A pair becomes a trip when the pods differ and the uncovered gap lies in
/// `(0, max_trip_duration_s]`. Visits chain: the destination of one trip is
/// the origin of the next. Trip ids are assigned in output order.
pub fn assemble_trips(visits: &[PodVisit], max_trip_duration_s: f64) -> Result<TripAssembly> {
    if !(max_trip_duration_s > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "max trip duration must be positive, got {max_trip_duration_s}"
        )));
    }
    let mut by_device: BTreeMap<&str, Vec<&PodVisit>> = BTreeMap::new();
    for v in visits {
        by_device.entry(v.device_id.as_str()).or_default().push(v);
    }

    let mut out = TripAssembly::default();
    for (device, mut seq) in by_device {
        seq.sort_by(|a, b| {
            a.t_first()
                .total_cmp(&b.t_first())
                .then_with(|| a.pod_id.cmp(&b.pod_id))
        });
        for pair in seq.windows(2) {
            out.candidates += 1;
            let (origin, dest) = (pair[0], pair[1]);
            let gap = dest.t_first() - origin.t_last();
            if origin.pod_id == dest.pod_id {
                out.discarded.same_pod += 1;
            } else if !(gap > 0.0) {
                out.discarded.non_positive_gap += 1;
            } else if gap > max_trip_duration_s {
                out.discarded.too_long += 1;
            } else {
                out.trips.push(Trip {
                    id: out.trips.len(),
                    device_id: device.to_string(),
                    origin: origin.clone(),
                    destination: dest.clone(),
                    label: None,
                });
            }
        }
    }
    Ok(out)
}

/// Labels trips whose device is in the roster; everything else is unlabelled.
pub fn partition_labelled(trips: Vec<Trip>, roster: &Roster) -> (Vec<Trip>, Vec<Trip>) {
    let mut labelled = Vec::new();
    let mut unlabelled = Vec::new();
    for mut trip in trips {
        match roster.get(&trip.device_id) {
            Some(&mode) => {
                trip.label = Some(mode);
                labelled.push(trip);
            }
            None => {
                trip.label = None;
                unlabelled.push(trip);
            }
        }
    }
    (labelled, unlabelled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mode::TravelMode;

    fn rec(device: &str, pod: &str, t: f64) -> ConnectionRecord {
        ConnectionRecord {
            device_id: device.into(),
            rssi: -60.0,
            timestamp: t,
            pod_id: pod.into(),
        }
    }

    fn visit(device: &str, pod: &str, t0: f64, t1: f64) -> PodVisit {
        PodVisit {
            device_id: device.into(),
            pod_id: pod.into(),
            records: vec![rec(device, pod, t0), rec(device, pod, t1)],
        }
    }

    #[test]
    fn one_visit_for_dense_records() {
        let records: Vec<_> = [0.0, 10.0, 15.0, 25.0, 30.0]
            .iter()
            .map(|&t| rec("d", "P1", t))
            .collect();
        let visits = sessionize(&records, 60.0).unwrap();
        assert_eq!(visits.len(), 1);
        assert_eq!(visits[0].message_count(), 5);
    }

    #[test]
    fn idle_gap_splits() {
        let records = vec![rec("d", "P1", 0.0), rec("d", "P1", 300.0)];
        assert_eq!(sessionize(&records, 60.0).unwrap().len(), 2);
    }

    #[test]
    fn other_pod_closes_visit() {
        let records = vec![
            rec("d", "P1", 0.0),
            rec("d", "P2", 20.0),
            rec("d", "P1", 40.0),
        ];
        assert_eq!(sessionize(&records, 120.0).unwrap().len(), 3);
    }

    #[test]
    fn duplicates_collapse() {
        let records = vec![rec("d", "P1", 1.0), rec("d", "P1", 1.0), rec("d", "P1", 2.0)];
        let visits = sessionize(&records, 60.0).unwrap();
        assert_eq!(visits[0].message_count(), 2);
    }

    #[test]
    fn rejects_non_positive_idle_gap() {
        assert!(sessionize(&[], 0.0).is_err());
        assert!(sessionize(&[], 10.0).unwrap().is_empty());
    }

    #[test]
    fn simple_trip() {
        let visits = vec![visit("d", "P1", 0.0, 30.0), visit("d", "P2", 120.0, 150.0)];
        let asm = assemble_trips(&visits, 1800.0).unwrap();
        assert_eq!(asm.trips.len(), 1);
        assert_eq!(asm.trips[0].origin.pod_id, "P1");
        assert_eq!(asm.trips[0].destination.pod_id, "P2");
        assert_eq!(asm.trips[0].gap_time(), 90.0);
    }

    #[test]
    fn same_pod_is_not_a_trip() {
        let visits = vec![visit("d", "P1", 0.0, 30.0), visit("d", "P1", 500.0, 520.0)];
        let asm = assemble_trips(&visits, 1800.0).unwrap();
        assert!(asm.trips.is_empty());
        assert_eq!(asm.discarded.same_pod, 1);
    }

    #[test]
    fn window_and_chaining() {
        let visits = vec![
            visit("d", "P1", 0.0, 30.0),
            visit("d", "P2", 100.0, 130.0),
            visit("d", "P3", 200.0, 230.0),
            visit("d", "P4", 5000.0, 5010.0),
            visit("e", "P1", 0.0, 10.0),
        ];
        let asm = assemble_trips(&visits, 1800.0).unwrap();
        assert_eq!(asm.trips.len(), 2);
        assert_eq!(asm.discarded.too_long, 1);
        assert_eq!(asm.candidates, 3);
        assert_eq!(asm.trips[0].destination, asm.trips[1].origin);
        assert_eq!(asm.trips.iter().map(|t| t.id).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn partition_by_roster() {
        let visits = vec![
            visit("a", "P1", 0.0, 30.0),
            visit("a", "P2", 100.0, 130.0),
            visit("a", "P3", 200.0, 230.0),
            visit("b", "P1", 0.0, 10.0),
            visit("b", "P2", 50.0, 60.0),
        ];
        let trips = assemble_trips(&visits, 1800.0).unwrap().trips;
        assert_eq!(trips.len(), 3);
        let mut roster = Roster::new();
        roster.insert("a".into(), TravelMode::Biking);
        let (lab, unlab) = partition_labelled(trips.clone(), &roster);
        assert_eq!((lab.len(), unlab.len()), (2, 1));
        assert!(lab.iter().all(|t| t.label == Some(TravelMode::Biking)));
        let (lab, unlab) = partition_labelled(trips, &Roster::new());
        assert_eq!((lab.len(), unlab.len()), (0, 3));
    }
}
