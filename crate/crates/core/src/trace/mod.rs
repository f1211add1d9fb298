//! Sensor log ingestion: parsing, pod visits, trip assembly and labelling.
//!
//! A raw log is a flat list of [`ConnectionRecord`]s merged from every pod.
//! [`sessionize`] groups them into per-device [`PodVisit`]s, [`assemble_trips`]
//! pairs consecutive visits at distinct pods into [`Trip`]s and
//! [`partition_labelled`] attaches modes from a participant roster.
//!
//! Phones that randomize their MAC address show up as many short-lived
//! devices; nothing here tries to stitch them back together.

mod deployment;
mod io;
mod log;
mod visits;

pub use deployment::{GapEntry, Pod, PodDeployment, DEFAULT_COVERAGE_RADIUS_M};
pub use io::{
    parse_roster, read_roster, read_trip_rows, reattach_trips, serialize_roster, write_trips,
    Roster, TripRow, TRIP_HEADER,
};
pub use log::{emit_log, parse_log, read_log, serialize_log, LineError, ParsedLog, LOG_HEADER};
pub use visits::{
    assemble_trips, partition_labelled, sessionize, DiscardReport, TripAssembly,
    DEFAULT_IDLE_GAP_S, DEFAULT_MAX_TRIP_DURATION_S,
};

use crate::mode::TravelMode;

/// One observation of a device by a pod.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionRecord {
    /// Lowercased hardware identifier.
    pub device_id: String,
    /// Signal strength in dBm, always negative.
    pub rssi: f64,
    /// Seconds since the Unix epoch, millisecond precision.
    pub timestamp: f64,
    pub pod_id: String,
}

/// Contiguous burst of records for one device at one pod.
#[derive(Debug, Clone, PartialEq)]
pub struct PodVisit {
    pub device_id: String,
    pub pod_id: String,
    /// Time-ordered records; never empty.
    pub records: Vec<ConnectionRecord>,
}

impl PodVisit {
    pub fn t_first(&self) -> f64 {
        self.records[0].timestamp
    }

    pub fn t_last(&self) -> f64 {
        self.records[self.records.len() - 1].timestamp
    }

    pub fn message_count(&self) -> usize {
        self.records.len()
    }

    pub fn dwell(&self) -> f64 {
        self.t_last() - self.t_first()
    }
}

/// Movement of one device from an origin pod visit to a destination pod visit.
#[derive(Debug, Clone, PartialEq)]
pub struct Trip {
    pub id: usize,
    pub device_id: String,
    pub origin: PodVisit,
    pub destination: PodVisit,
    pub label: Option<TravelMode>,
}

impl Trip {
    /// Uncovered travel time between leaving the origin and reaching the destination.
    pub fn gap_time(&self) -> f64 {
        self.destination.t_first() - self.origin.t_last()
    }
}
