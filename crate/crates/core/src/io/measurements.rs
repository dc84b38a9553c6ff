use std::collections::HashSet;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};

use crate::error::{Error, Result};
use crate::geo_scene::GeoPoint;
use crate::record::{MeasurementRecord, Transmitter};

pub const REQUIRED_COLUMNS: [&str; 12] = [
    "record_id",
    "timestamp",
    "ue_lon",
    "ue_lat",
    "ue_altitude_ag_m",
    "tx_id",
    "tx_lon",
    "tx_lat",
    "tx_height_m",
    "tx_power_dbm",
    "downlink_frequency_mhz",
    "rsrp_dbm",
];
pub const RSRQ_COLUMN: &str = "rsrq_db";

/// A row that parsed but was rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct DroppedRow {
    /// 1-based line in the source file.
    pub line: usize,
    pub record_id: Option<u64>,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct MeasurementTable {
    pub records: Vec<MeasurementRecord>,
    /// Source line of each kept record.
    pub lines: Vec<usize>,
    pub has_rsrq: bool,
    pub total_rows: usize,
    pub dropped: Vec<DroppedRow>,
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s.trim()).ok().map(|t| t.with_timezone(&Utc))
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// Reads a measurement CSV. Syntax and type errors fail with the offending
/// line; rows with invalid coordinates or duplicate ids are dropped.
pub fn read_measurements(path: &Path) -> Result<MeasurementTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(path, 1, format!("{other:?}")),
        })?;
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mut idx = [0usize; 12];
    for (slot, name) in idx.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = col(name).ok_or_else(|| Error::Schema(format!("{}: missing column {name}", path.display())))?;
    }
    let rsrq_idx = col(RSRQ_COLUMN);

    let mut table = MeasurementTable {
        has_rsrq: rsrq_idx.is_some(),
        ..MeasurementTable::default()
    };
    let mut seen = HashSet::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        table.total_rows += 1;
        let field = |k: usize| row.get(idx[k]).unwrap_or("");
        let num = |k: usize| -> Result<f64> {
            field(k).parse::<f64>().map_err(|_| {
                parse_err(path, line, format!("{}: not a number: {:?}", REQUIRED_COLUMNS[k], field(k)))
            })
        };
        let record_id: u64 = field(0)
            .parse()
            .map_err(|_| parse_err(path, line, format!("record_id: not an integer: {:?}", field(0))))?;
        let timestamp = parse_timestamp(field(1))
            .ok_or_else(|| parse_err(path, line, format!("timestamp: not RFC 3339: {:?}", field(1))))?;
        let vals: Vec<f64> = [2, 3, 4, 6, 7, 8, 9, 10, 11]
            .into_iter()
            .map(num)
            .collect::<Result<_>>()?;
        let [ue_lon, ue_lat, ue_alt, tx_lon, tx_lat, tx_h, tx_p, freq, rsrp] = vals[..] else {
            unreachable!()
        };
        let rsrq_db = match rsrq_idx.map(|i| row.get(i).unwrap_or("")) {
            None | Some("") => None,
            Some(s) => Some(
                s.parse::<f64>()
                    .map_err(|_| parse_err(path, line, format!("rsrq_db: not a number: {s:?}")))?,
            ),
        };

        let mut drop = |reason: String| {
            table.dropped.push(DroppedRow {
                line,
                record_id: Some(record_id),
                reason,
            })
        };
        if !seen.insert(record_id) {
            drop("duplicate record_id".into());
            continue;
        }
        let ue = match GeoPoint::new(ue_lon, ue_lat, ue_alt) {
            Ok(p) => p,
            Err(e) => {
                drop(format!("ue: {e}"));
                continue;
            }
        };
        if let Err(e) = GeoPoint::new(tx_lon, tx_lat, tx_h) {
            drop(format!("tx: {e}"));
            continue;
        }
        if !rsrp.is_finite() || rsrq_db.is_some_and(|q| !q.is_finite()) {
            drop("non-finite measurement".into());
            continue;
        }
        table.records.push(MeasurementRecord {
            record_id,
            timestamp,
            ue,
            tx: Transmitter {
                id: field(5).to_string(),
                lon: tx_lon,
                lat: tx_lat,
                height_m: tx_h,
                power_dbm: tx_p,
                frequency_mhz: freq,
            },
            rsrp_dbm: rsrp,
            rsrq_db,
        });
        table.lines.push(line);
    }
    Ok(table)
}

pub fn write_measurements(path: &Path, records: &[MeasurementRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidInput(format!("{other:?}")),
    })?;
    let to_err = |e: csv::Error| Error::InvalidInput(format!("{}: {e}", path.display()));
    let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
    header.push(RSRQ_COLUMN);
    w.write_record(&header).map_err(to_err)?;
    for r in records {
        w.write_record([
            r.record_id.to_string(),
            format_timestamp(&r.timestamp),
            r.ue.lon.to_string(),
            r.ue.lat.to_string(),
            r.ue.alt_ag_m.to_string(),
            r.tx.id.clone(),
            r.tx.lon.to_string(),
            r.tx.lat.to_string(),
            r.tx.height_m.to_string(),
            r.tx.power_dbm.to_string(),
            r.tx.frequency_mhz.to_string(),
            r.rsrp_dbm.to_string(),
            r.rsrq_db.map(|q| q.to_string()).unwrap_or_default(),
        ])
        .map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn sample(id: u64, rsrq: Option<f64>) -> MeasurementRecord {
        MeasurementRecord {
            record_id: id,
            timestamp: Utc.with_ymd_and_hms(2021, 6, 1, 12, 30, 5).unwrap(),
            ue: GeoPoint::new(-79.3912345678, 43.6451, 1.5).unwrap(),
            tx: Transmitter {
                id: "tx-1".into(),
                lon: -79.39,
                lat: 43.64,
                height_m: 30.0,
                power_dbm: 43.0,
                frequency_mhz: 2600.0,
            },
            rsrp_dbm: -95.25,
            rsrq_db: rsrq,
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let recs = vec![sample(1, Some(-10.5)), sample(2, None)];
        write_measurements(&p, &recs).unwrap();
        let t = read_measurements(&p).unwrap();
        assert_eq!(t.records, recs);
        assert!(t.has_rsrq);
        assert_eq!(t.lines, vec![2, 3]);
    }

    #[test]
    fn header_only_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        write_measurements(&p, &[]).unwrap();
        let t = read_measurements(&p).unwrap();
        assert!(t.records.is_empty());
        assert_eq!(t.total_rows, 0);
    }

    #[test]
    fn missing_column_and_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        std::fs::write(&p, "record_id,timestamp\n1,2021-01-01T00:00:00Z\n").unwrap();
        let e = read_measurements(&p).unwrap_err();
        assert!(e.to_string().contains("missing column ue_lon"), "{e}");

        let mut text = REQUIRED_COLUMNS.join(",");
        text.push('\n');
        text.push_str("1,2021-01-01T00:00:00Z,-79.39,43.64,1.5,t,-79.38,43.64,30,43,2600,-90\n");
        text.push_str("2,2021-01-01T00:00:00Z,abc,43.64,1.5,t,-79.38,43.64,30,43,2600,-90\n");
        std::fs::write(&p, &text).unwrap();
        match read_measurements(&p).unwrap_err() {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, 3);
                assert!(msg.contains("ue_lon"));
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn invalid_rows_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let mut text = REQUIRED_COLUMNS.join(",");
        text.push('\n');
        text.push_str("1,2021-01-01T00:00:00Z,-79.39,43.64,1.5,t,-79.38,43.64,30,43,2600,-90\n");
        text.push_str("1,2021-01-01T00:00:00Z,-79.39,43.64,1.5,t,-79.38,43.64,30,43,2600,-90\n");
        text.push_str("3,2021-01-01T00:00:00Z,-79.39,95.0,1.5,t,-79.38,43.64,30,43,2600,-90\n");
        std::fs::write(&p, &text).unwrap();
        let t = read_measurements(&p).unwrap();
        assert_eq!(t.records.len(), 1);
        assert!(!t.has_rsrq);
        assert_eq!(t.dropped.len(), 2);
        assert_eq!(t.dropped[0].reason, "duplicate record_id");
        assert_eq!(t.dropped[1].line, 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn floats_round_trip(lon in -180.0..180.0f64, lat in -90.0..90.0f64, rsrp in -140.0..-40.0f64, q in -20.0..-3.0f64, secs in 0i64..2_000_000_000) {
            let mut r = sample(7, Some(q));
            r.ue = GeoPoint::new(lon, lat, 2.25).unwrap();
            r.rsrp_dbm = rsrp;
            r.timestamp = Utc.timestamp_opt(secs, 0).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("m.csv");
            write_measurements(&p, std::slice::from_ref(&r)).unwrap();
            prop_assert_eq!(read_measurements(&p).unwrap().records, vec![r]);
        }
    }
}
