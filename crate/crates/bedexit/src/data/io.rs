//! Canonical on-disk dataset format.
//!
//! A dataset directory holds one pair of files per patient:
//!
//! - `patient_<id>_readings.csv` with header `t_s,antenna_id,rssi_dbm,phase_rad,freq_mhz,tag_id`
//! - `patient_<id>_labels.csv` with header `start_s,end_s,label`
//!
//! UTF-8, LF line endings, `.` decimal separator; `tag_id` is `1` or `2`;
//! `label` is `in_bed` or `out_of_bed`. Column order is part of the
//! contract: a mismatched header is an error, never reinterpreted.

use std::fs;
use std::path::Path;

use crate::data::{DeploymentConfig, Label, LabelInterval, PatientRecord, TagId, TagReading};
use crate::error::{Error, Result};

pub const READINGS_HEADER: &str = "t_s,antenna_id,rssi_dbm,phase_rad,freq_mhz,tag_id";
pub const LABELS_HEADER: &str = "start_s,end_s,label";

/// Load every patient in `dir`, validate, and return records sorted by
/// patient id. An empty directory yields an empty sequence.
pub fn load_dataset(dir: &Path, config: &DeploymentConfig) -> Result<Vec<PatientRecord>> {
    config.validate()?;
    let mut ids = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if let Some(rest) = name.strip_prefix("patient_") {
            if let Some(id_str) = rest.strip_suffix("_readings.csv") {
                let id: u32 = id_str.parse().map_err(|_| Error::MalformedRow {
                    path: entry.path(),
                    line: 0,
                    msg: format!("cannot parse patient id from file name {name:?}"),
                })?;
                ids.push(id);
            }
        }
    }
    ids.sort_unstable();
    ids.dedup();
    let mut records = Vec::with_capacity(ids.len());
    for id in ids {
        records.push(load_patient(dir, id, config)?);
    }
    Ok(records)
}

/// Load and validate a single patient's pair of files.
pub fn load_patient(dir: &Path, patient_id: u32, config: &DeploymentConfig) -> Result<PatientRecord> {
    let readings_path = dir.join(format!("patient_{patient_id}_readings.csv"));
    let labels_path = dir.join(format!("patient_{patient_id}_labels.csv"));
    let readings = read_readings(&readings_path)?;
    let labels = read_labels(&labels_path)?;
    let mut record = PatientRecord { patient_id, readings, labels };
    record.validate(config)?;
    Ok(record)
}

/// Write a patient's pair of files into `dir` in the canonical format.
pub fn write_patient(dir: &Path, record: &PatientRecord) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let readings_path = dir.join(format!("patient_{}_readings.csv", record.patient_id));
    let labels_path = dir.join(format!("patient_{}_labels.csv", record.patient_id));

    let mut out = String::with_capacity(64 * record.readings.len() + 64);
    out.push_str(READINGS_HEADER);
    out.push('\n');
    for r in &record.readings {
        // Display of f64 round-trips exactly through parse, which keeps
        // write-then-load bitwise equal.
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.t,
            r.antenna_id,
            r.rssi_dbm,
            r.phase_rad,
            r.freq_mhz,
            r.tag_id.code()
        ));
    }
    fs::write(&readings_path, out).map_err(|e| Error::io(&readings_path, e))?;

    let mut out = String::new();
    out.push_str(LABELS_HEADER);
    out.push('\n');
    for iv in &record.labels {
        let label = match iv.label {
            Label::InBed => "in_bed",
            Label::OutOfBed => "out_of_bed",
        };
        out.push_str(&format!("{},{},{}\n", iv.start, iv.end, label));
    }
    fs::write(&labels_path, out).map_err(|e| Error::io(&labels_path, e))?;
    Ok(())
}

fn open_csv(path: &Path, expected_header: &str) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedRow { path: path.into(), line: 1, msg: e.to_string() })?;
    let found = headers.iter().collect::<Vec<_>>().join(",");
    if found != expected_header {
        return Err(Error::HeaderMismatch {
            path: path.into(),
            found,
            expected: expected_header.into(),
        });
    }
    Ok(reader)
}

fn row_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::MalformedRow { path: path.into(), line, msg: msg.into() }
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    line: u64,
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<T> {
    let raw = record
        .get(idx)
        .ok_or_else(|| row_err(path, line, format!("missing column {name}")))?;
    raw.parse()
        .map_err(|_| row_err(path, line, format!("cannot parse {name} from {raw:?}")))
}

fn read_readings(path: &Path) -> Result<Vec<TagReading>> {
    let mut reader = open_csv(path, READINGS_HEADER)?;
    let mut readings = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| row_err(path, 0, e.to_string()))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != 6 {
            return Err(row_err(path, line, format!("expected 6 columns, got {}", row.len())));
        }
        let tag_code: u8 = parse_field(path, line, &row, 5, "tag_id")?;
        let tag_id = TagId::from_code(tag_code)
            .ok_or_else(|| row_err(path, line, format!("tag_id must be 1 or 2, got {tag_code}")))?;
        readings.push(TagReading {
            t: parse_field(path, line, &row, 0, "t_s")?,
            antenna_id: parse_field(path, line, &row, 1, "antenna_id")?,
            rssi_dbm: parse_field(path, line, &row, 2, "rssi_dbm")?,
            phase_rad: parse_field(path, line, &row, 3, "phase_rad")?,
            freq_mhz: parse_field(path, line, &row, 4, "freq_mhz")?,
            tag_id,
        });
    }
    Ok(readings)
}

fn read_labels(path: &Path) -> Result<Vec<LabelInterval>> {
    let mut reader = open_csv(path, LABELS_HEADER)?;
    let mut labels = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| row_err(path, 0, e.to_string()))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != 3 {
            return Err(row_err(path, line, format!("expected 3 columns, got {}", row.len())));
        }
        let label = match row.get(2).unwrap_or("") {
            "in_bed" => Label::InBed,
            "out_of_bed" => Label::OutOfBed,
            other => return Err(row_err(path, line, format!("unknown label {other:?}"))),
        };
        labels.push(LabelInterval {
            start: parse_field(path, line, &row, 0, "start_s")?,
            end: parse_field(path, line, &row, 1, "end_s")?,
            label,
        });
    }
    Ok(labels)
}
