use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use super::{ConnectionRecord, PodVisit, Trip};
use crate::error::{Error, Result};
use crate::mode::TravelMode;

/// Participant device → known mode.
pub type Roster = HashMap<String, TravelMode>;

pub const TRIP_HEADER: &str =
    "trip_id,device_id,origin_pod,dest_pod,t_origin_first,t_origin_last,t_dest_first,t_dest_last,label";

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Parses a `device_id,mode` roster. The header is optional.
pub fn parse_roster(raw: &str, path: &Path) -> Result<Roster> {
    let mut roster = Roster::new();
    for (idx, line) in raw.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (idx == 0 && line.eq_ignore_ascii_case("device_id,mode")) {
            continue;
        }
        let (device, mode) = line
            .split_once(',')
            .ok_or_else(|| parse_err(path, idx + 1, "expected device_id,mode"))?;
        let mode: TravelMode = mode
            .parse()
            .map_err(|e: Error| parse_err(path, idx + 1, e.to_string()))?;
        roster.insert(device.trim().to_ascii_lowercase(), mode);
    }
    Ok(roster)
}

pub fn read_roster(path: &Path) -> Result<Roster> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_roster(&raw, path)
}

/// Roster CSV sorted by device id.
pub fn serialize_roster(roster: &Roster) -> String {
    let sorted: BTreeMap<_, _> = roster.iter().collect();
    let mut out = String::from("device_id,mode\n");
    for (device, mode) in sorted {
        let _ = writeln!(out, "{device},{}", mode.code());
    }
    out
}

pub fn write_trips(trips: &[Trip], path: &Path) -> Result<()> {
    let mut out = String::from(TRIP_HEADER);
    out.push('\n');
    for t in trips {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.3},{:.3},{:.3},{:.3},{}",
            t.id,
            t.device_id,
            t.origin.pod_id,
            t.destination.pod_id,
            t.origin.t_first(),
            t.origin.t_last(),
            t.destination.t_first(),
            t.destination.t_last(),
            t.label.map(TravelMode::code).unwrap_or("")
        );
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// One line of a trip CSV, without the underlying records.
#[derive(Debug, Clone, PartialEq)]
pub struct TripRow {
    pub id: usize,
    pub device_id: String,
    pub origin_pod: String,
    pub dest_pod: String,
    pub origin_window: (f64, f64),
    pub dest_window: (f64, f64),
    pub label: Option<TravelMode>,
}

pub fn read_trip_rows(path: &Path) -> Result<Vec<TripRow>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        if line.trim().is_empty() || (idx == 0 && line.starts_with("trip_id")) {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 9 {
            return Err(parse_err(path, idx + 1, "expected 9 fields"));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| parse_err(path, idx + 1, format!("bad number {s:?}")))
        };
        let id = f[0]
            .parse()
            .map_err(|_| parse_err(path, idx + 1, "bad trip id"))?;
        let label = if f[8].is_empty() {
            None
        } else {
            Some(
                f[8].parse()
                    .map_err(|e: Error| parse_err(path, idx + 1, e.to_string()))?,
            )
        };
        rows.push(TripRow {
            id,
            device_id: f[1].to_ascii_lowercase(),
            origin_pod: f[2].to_string(),
            dest_pod: f[3].to_string(),
            origin_window: (num(f[4])?, num(f[5])?),
            dest_window: (num(f[6])?, num(f[7])?),
            label,
        });
    }
    Ok(rows)
}

/// Rebuilds full trips by collecting each endpoint's records from the log.
///
/// Window bounds in the trip file are rounded to milliseconds, so matching
/// allows half a millisecond of slack.
pub fn reattach_trips(rows: &[TripRow], records: &[ConnectionRecord]) -> Result<Vec<Trip>> {
    let mut index: HashMap<(&str, &str), Vec<&ConnectionRecord>> = HashMap::new();
    for r in records {
        index
            .entry((r.device_id.as_str(), r.pod_id.as_str()))
            .or_default()
            .push(r);
    }
    for list in index.values_mut() {
        list.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        list.dedup_by(|b, a| a.timestamp == b.timestamp && a.rssi == b.rssi);
    }
    let collect = |device: &str, pod: &str, (lo, hi): (f64, f64), id: usize| -> Result<PodVisit> {
        let recs: Vec<ConnectionRecord> = index
            .get(&(device, pod))
            .map(|list| {
                list.iter()
                    .filter(|r| r.timestamp >= lo - 5e-4 && r.timestamp <= hi + 5e-4)
                    .map(|r| (*r).clone())
                    .collect()
            })
            .unwrap_or_default();
        if recs.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "trip {id}: no records for {device} at {pod} in [{lo}, {hi}]"
            )));
        }
        Ok(PodVisit {
            device_id: device.to_string(),
            pod_id: pod.to_string(),
            records: recs,
        })
    };
    rows.iter()
        .map(|row| {
            Ok(Trip {
                id: row.id,
                device_id: row.device_id.clone(),
                origin: collect(&row.device_id, &row.origin_pod, row.origin_window, row.id)?,
                destination: collect(&row.device_id, &row.dest_pod, row.dest_window, row.id)?,
                label: row.label,
            })
        })
        .collect()
}
