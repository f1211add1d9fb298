use std::fmt::Write as _;
use std::path::Path;

use super::ConnectionRecord;
use crate::error::{Error, Result};

pub const LOG_HEADER: &str = "device_id,rssi_dbm,unix_timestamp,pod_id";

/// A malformed input line. Parsing continues past it.
#[derive(Debug, Clone, PartialEq)]
pub struct LineError {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedLog {
    pub records: Vec<ConnectionRecord>,
    pub errors: Vec<LineError>,
}

/// Parses the `device_id,rssi_dbm,unix_timestamp,pod_id` log format.
///
/// The header line is optional and blank lines are ignored. Every other line
/// either yields a record or a [`LineError`]; records keep file order.
pub fn parse_log(raw: &str) -> ParsedLog {
    let mut out = ParsedLog::default();
    for (idx, line) in raw.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        if idx == 0 && line.trim().eq_ignore_ascii_case(LOG_HEADER) {
            continue;
        }
        match parse_line(line) {
            Ok(record) => out.records.push(record),
            Err(message) => out.errors.push(LineError {
                line: line_no,
                message,
            }),
        }
    }
    out
}

fn parse_line(line: &str) -> Result<ConnectionRecord, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(format!("expected 4 fields, found {}", fields.len()));
    }
    let device_id = fields[0].to_ascii_lowercase();
    if device_id.is_empty() {
        return Err("empty device id".into());
    }
    let rssi: f64 = fields[1]
        .parse()
        .map_err(|_| format!("bad rssi {:?}", fields[1]))?;
    if !(rssi < 0.0) {
        return Err(format!("rssi must be negative, got {rssi}"));
    }
    let timestamp: f64 = fields[2]
        .parse()
        .map_err(|_| format!("bad timestamp {:?}", fields[2]))?;
    if !timestamp.is_finite() {
        return Err("timestamp is not finite".into());
    }
    let pod_id = fields[3].to_string();
    if pod_id.is_empty() {
        return Err("empty pod id".into());
    }
    Ok(ConnectionRecord {
        device_id,
        rssi,
        timestamp,
        pod_id,
    })
}

/// Canonical text form: header, then one line per record in the given order.
pub fn serialize_log(records: &[ConnectionRecord]) -> String {
    let mut out = String::with_capacity(40 * (records.len() + 1));
    out.push_str(LOG_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{:.3},{}",
            r.device_id, r.rssi, r.timestamp, r.pod_id
        );
    }
    out
}

pub fn read_log(path: &Path) -> Result<ParsedLog> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_log(&raw))
}

/// Writes records sorted by timestamp in the canonical format.
pub fn emit_log(records: &[ConnectionRecord], path: &Path) -> Result<()> {
    let mut sorted = records.to_vec();
    sorted.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    std::fs::write(path, serialize_log(&sorted)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_line() {
        let parsed = parse_log("AA:BB:CC:DD:EE:FF,-67,1497535200.250,P1\n");
        assert!(parsed.errors.is_empty());
        let r = &parsed.records[0];
        assert_eq!(r.device_id, "aa:bb:cc:dd:ee:ff");
        assert_eq!(r.rssi, -67.0);
        assert_eq!(r.timestamp, 1497535200.25);
        assert_eq!(r.pod_id, "P1");
    }

    #[test]
    fn isolates_bad_lines() {
        let raw = "a,-60,1.000,P1\nb,-61,2.000,P2\ngarbage\nc,-62,3.000,P3\n";
        let parsed = parse_log(raw);
        assert_eq!(parsed.records.len(), 3);
        assert_eq!(parsed.errors.len(), 1);
        assert_eq!(parsed.errors[0].line, 3);
    }

    #[test]
    fn rejects_invalid_fields() {
        let raw = "a,-60,1.0,\nb,0,1.0,P1\nc,-1,inf,P1\nd,x,1,P1\n,-3,1,P1\n";
        let parsed = parse_log(raw);
        assert!(parsed.records.is_empty());
        assert_eq!(
            parsed.errors.iter().map(|e| e.line).collect::<Vec<_>>(),
            vec![1, 2, 3, 4, 5]
        );
    }

    #[test]
    fn empty_and_header_only() {
        assert_eq!(parse_log(""), ParsedLog::default());
        assert_eq!(parse_log(&format!("{LOG_HEADER}\n")), ParsedLog::default());
    }

    #[test]
    fn header_only_after_emit_of_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        emit_log(&[], &path).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            format!("{LOG_HEADER}\n")
        );
    }
}
