use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{ObservationRecord, COLUMNS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    MissingValue,
    NonFinite,
    Unparseable,
    OutOfRange,
    FieldCount,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::MissingValue => "missing-value",
            RejectReason::NonFinite => "non-finite",
            RejectReason::Unparseable => "unparseable",
            RejectReason::OutOfRange => "out-of-range",
            RejectReason::FieldCount => "field-count",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    /// 1-based line in the source, header included; 0 when not from a file.
    pub line: u64,
    pub field: String,
    pub reason: RejectReason,
}

/// How missing or non-finite measurement values are treated on ingest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IngestMode {
    /// Reject the row immediately.
    #[default]
    Strict,
    /// Keep the row with NaN/∞ in place; [`super::remove_non_finite`]
    /// drops it later. `time`, `device_id`, `SF` and `f_count` must still
    /// parse, since dedup and the SF filter key on them.
    Lenient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutcome {
    pub records: Vec<ObservationRecord>,
    pub rejections: Vec<Rejection>,
    pub rows_read: usize,
}

const TIME_FORMATS: [&str; 3] = ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f", "%Y/%m/%d %H:%M:%S%.f"];

fn parse_time(raw: &str) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    TIME_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
        // Offsets are dropped: the wall-clock reading is what the dataset means.
        .or_else(|| DateTime::parse_from_rfc3339(raw).ok().map(|t| t.naive_local()))
        .or_else(|| DateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S%.f%:z").ok().map(|t| t.naive_local()))
}

pub(crate) fn format_time(t: &NaiveDateTime) -> String {
    t.format("%Y-%m-%d %H:%M:%S%.f").to_string()
}

struct Row<'a> {
    fields: &'a csv::StringRecord,
    index: &'a [usize; 20],
    line: u64,
    mode: IngestMode,
}

impl Row<'_> {
    fn raw(&self, col: usize) -> &str {
        self.fields.get(self.index[col]).unwrap_or("").trim()
    }

    fn reject(&self, col: usize, reason: RejectReason) -> Rejection {
        Rejection { line: self.line, field: COLUMNS[col].to_string(), reason }
    }

    /// Parses a measurement column; `lenient` keeps gaps as NaN.
    fn number(&self, col: usize) -> std::result::Result<f64, Rejection> {
        let raw = self.raw(col);
        if raw.is_empty() || raw.eq_ignore_ascii_case("nan") || raw.eq_ignore_ascii_case("null") {
            return match self.mode {
                IngestMode::Lenient => Ok(f64::NAN),
                IngestMode::Strict => Err(self.reject(col, RejectReason::MissingValue)),
            };
        }
        let v: f64 = raw.parse().map_err(|_| self.reject(col, RejectReason::Unparseable))?;
        if !v.is_finite() && self.mode == IngestMode::Strict {
            return Err(self.reject(col, RejectReason::NonFinite));
        }
        Ok(v)
    }

    fn required_integer(&self, col: usize) -> std::result::Result<f64, Rejection> {
        let raw = self.raw(col);
        if raw.is_empty() || raw.eq_ignore_ascii_case("nan") {
            return Err(self.reject(col, RejectReason::MissingValue));
        }
        let v: f64 = raw.parse().map_err(|_| self.reject(col, RejectReason::Unparseable))?;
        if !v.is_finite() {
            return Err(self.reject(col, RejectReason::NonFinite));
        }
        if v.fract() != 0.0 || v < 0.0 {
            return Err(self.reject(col, RejectReason::OutOfRange));
        }
        Ok(v)
    }

    fn check_range(&self, col: usize, v: f64, ok: impl Fn(f64) -> bool) -> std::result::Result<(), Rejection> {
        // NaN/∞ pass through here; only finite out-of-range values are rejected.
        if v.is_finite() && !ok(v) {
            return Err(self.reject(col, RejectReason::OutOfRange));
        }
        Ok(())
    }

    fn parse(&self) -> std::result::Result<ObservationRecord, Rejection> {
        let time_raw = self.raw(0);
        if time_raw.is_empty() {
            return Err(self.reject(0, RejectReason::MissingValue));
        }
        let time = parse_time(time_raw).ok_or_else(|| self.reject(0, RejectReason::Unparseable))?;
        let device_id = self.raw(1);
        if device_id.is_empty() {
            return Err(self.reject(1, RejectReason::MissingValue));
        }
        let sf = self.required_integer(9)?;
        if !(7.0..=12.0).contains(&sf) {
            return Err(self.reject(9, RejectReason::OutOfRange));
        }
        let f_count = self.required_integer(11)?;

        let rec = ObservationRecord {
            time,
            device_id: device_id.to_string(),
            co2_ppm: self.number(2)?,
            humidity_pct: self.number(3)?,
            pm25_ugm3: self.number(4)?,
            pressure_hpa: self.number(5)?,
            temperature_c: self.number(6)?,
            rssi_dbm: self.number(7)?,
            snr_db: self.number(8)?,
            sf: sf as u8,
            frequency_mhz: self.number(10)?,
            f_count: f_count as u64,
            p_count: self.number(12)?,
            toa_s: self.number(13)?,
            distance_m: self.number(14)?,
            c_walls: self.number(15)?,
            w_walls: self.number(16)?,
            exp_pl_db: self.number(17)?,
            n_power_dbm: self.number(18)?,
            esp_dbm: self.number(19)?,
        };
        let count = |v: f64| v >= 0.0 && v.fract() == 0.0;
        self.check_range(2, rec.co2_ppm, |v| v > 0.0)?;
        self.check_range(3, rec.humidity_pct, |v| (0.0..=100.0).contains(&v))?;
        self.check_range(4, rec.pm25_ugm3, |v| v >= 0.0)?;
        self.check_range(10, rec.frequency_mhz, |v| v > 0.0)?;
        self.check_range(14, rec.distance_m, |v| v > 0.0)?;
        self.check_range(15, rec.c_walls, count)?;
        self.check_range(16, rec.w_walls, count)?;
        Ok(rec)
    }
}

fn header_index(headers: &csv::StringRecord) -> Result<[usize; 20]> {
    let mut index = [usize::MAX; 20];
    for (pos, name) in headers.iter().enumerate() {
        if let Some(col) = COLUMNS.iter().position(|c| *c == name.trim()) {
            if index[col] != usize::MAX {
                return Err(Error::MalformedHeader(format!("duplicate column `{}`", COLUMNS[col])));
            }
            index[col] = pos;
        }
    }
    let missing: Vec<&str> = COLUMNS.iter().zip(index).filter(|(_, i)| *i == usize::MAX).map(|(c, _)| *c).collect();
    if !missing.is_empty() {
        return Err(Error::MalformedHeader(format!("missing columns: {}", missing.join(", "))));
    }
    Ok(index)
}

/// Reads dataset rows, logging every rejected row with a reason.
///
/// Extra columns are ignored; every named column must be present once.
pub fn ingest<R: Read>(source: R, mode: IngestMode) -> Result<IngestOutcome> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let headers = reader.headers().map_err(|e| Error::MalformedHeader(e.to_string()))?.clone();
    let index = header_index(&headers)?;

    let mut records = Vec::new();
    let mut rejections = Vec::new();
    let mut rows_read = 0;
    let mut fields = csv::StringRecord::new();
    loop {
        let line = reader.position().line();
        if !reader.read_record(&mut fields)? {
            break;
        }
        rows_read += 1;
        if fields.len() < headers.len() {
            rejections.push(Rejection { line, field: String::new(), reason: RejectReason::FieldCount });
            continue;
        }
        match (Row { fields: &fields, index: &index, line, mode }).parse() {
            Ok(rec) => records.push(rec),
            Err(rejection) => {
                log::debug!("line {}: {} in `{}`", rejection.line, rejection.reason, rejection.field);
                rejections.push(rejection);
            }
        }
    }
    Ok(IngestOutcome { records, rejections, rows_read })
}

pub fn ingest_path(path: &Path, mode: IngestMode) -> Result<IngestOutcome> {
    ingest(std::fs::File::open(path)?, mode)
}

/// Writes rows in the canonical column order.
pub fn write_records<W: Write>(sink: W, records: &[ObservationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(COLUMNS)?;
    for r in records {
        let mut row = Vec::with_capacity(COLUMNS.len());
        row.push(format_time(&r.time));
        row.push(r.device_id.clone());
        for col in &COLUMNS[2..] {
            let v = r.numeric(col).expect("known column");
            row.push(match *col {
                "SF" => r.sf.to_string(),
                "f_count" => r.f_count.to_string(),
                _ => v.to_string(),
            });
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
