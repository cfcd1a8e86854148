//! Canonical data model for RFID tag-read streams: readings, ground-truth
//! label intervals, per-patient records, and the deployment description.
//!
//! A record is immutable after loading and safe to share read-only across
//! evaluation folds.

mod io;

pub use io::{load_dataset, load_patient, write_patient, READINGS_HEADER, LABELS_HEADER};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which of the two tag identifiers a reading reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TagId {
    Id1,
    Id2,
}

impl TagId {
    pub fn code(self) -> u8 {
        match self {
            TagId::Id1 => 1,
            TagId::Id2 => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(TagId::Id1),
            2 => Some(TagId::Id2),
            _ => None,
        }
    }
}

/// One reader report. Timestamps are seconds since the start of the record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagReading {
    /// Seconds since record start; monotone (non-decreasing) within a record.
    pub t: f64,
    /// Reader antenna that captured the read.
    pub antenna_id: u8,
    /// Received signal strength of the backscattered reply, dBm (<= 0).
    pub rssi_dbm: f64,
    /// Carrier/return phase angle, radians in [0, 2*pi).
    pub phase_rad: f64,
    /// Carrier channel frequency in MHz at the time of the read.
    pub freq_mhz: f64,
    /// Reported tag identifier.
    pub tag_id: TagId,
}

/// Ground-truth activity class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    InBed,
    OutOfBed,
}

/// A labeled time span. Intervals within a record are non-overlapping,
/// time-sorted, and tile the record without gaps over the readings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelInterval {
    pub start: f64,
    pub end: f64,
    pub label: Label,
}

/// One antenna of the deployment, with its mounting position in the room
/// frame (meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Antenna {
    pub id: u8,
    pub position: [f64; 3],
    /// Unit pointing direction of the antenna main lobe.
    #[serde(default = "default_boresight")]
    pub boresight: [f64; 3],
}

fn default_boresight() -> [f64; 3] {
    [0.0, 0.0, -1.0]
}

/// Reader-side deployment description shared by a whole dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentConfig {
    pub antennas: Vec<Antenna>,
    /// Regulated band [f_lo, f_hi] in MHz.
    pub band_mhz: [f64; 2],
    /// Reader output power in watts.
    pub reader_power_w: f64,
}

impl DeploymentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.antennas.is_empty() {
            return Err(Error::Config("deployment needs at least one antenna".into()));
        }
        if !(self.band_mhz[0] < self.band_mhz[1]) {
            return Err(Error::Config(format!(
                "band must satisfy f_lo < f_hi, got {:?}",
                self.band_mhz
            )));
        }
        let mut ids: Vec<u8> = self.antennas.iter().map(|a| a.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.antennas.len() {
            return Err(Error::Config("duplicate antenna ids in deployment".into()));
        }
        Ok(())
    }

    /// Antenna ids in ascending order. Feature layouts and one-hot encodings
    /// follow this order.
    pub fn antenna_ids(&self) -> Vec<u8> {
        let mut ids: Vec<u8> = self.antennas.iter().map(|a| a.id).collect();
        ids.sort_unstable();
        ids
    }

    pub fn antenna(&self, id: u8) -> Option<&Antenna> {
        self.antennas.iter().find(|a| a.id == id)
    }
}

/// A patient's full labeled stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: u32,
    pub readings: Vec<TagReading>,
    pub labels: Vec<LabelInterval>,
}

impl PatientRecord {
    /// Canonicalize (stable sort equal timestamps by antenna id) and check
    /// every invariant. Called by the loader and by the simulator on write.
    pub fn validate(&mut self, config: &DeploymentConfig) -> Result<()> {
        let pid = self.patient_id;

        // Label intervals: ordered, non-overlapping, start < end.
        for (i, iv) in self.labels.iter().enumerate() {
            if !(iv.start < iv.end) {
                return Err(Error::validation(
                    pid,
                    format!("label interval {i} has start {} >= end {}", iv.start, iv.end),
                ));
            }
            if i > 0 && iv.start < self.labels[i - 1].end {
                return Err(Error::validation(
                    pid,
                    format!("label interval {i} overlaps or precedes its predecessor"),
                ));
            }
        }

        // Readings: timestamps must never decrease; duplicates are allowed
        // and canonicalized by (t, antenna_id).
        for (i, r) in self.readings.iter().enumerate() {
            if i > 0 && r.t < self.readings[i - 1].t {
                return Err(Error::validation(
                    pid,
                    format!(
                        "timestamp decreases at reading {i}: {} after {}",
                        r.t,
                        self.readings[i - 1].t
                    ),
                ));
            }
        }
        self.readings
            .sort_by(|a, b| (a.t, a.antenna_id).partial_cmp(&(b.t, b.antenna_id)).unwrap());

        let ids = config.antenna_ids();
        for (i, r) in self.readings.iter().enumerate() {
            if !ids.contains(&r.antenna_id) {
                return Err(Error::validation(
                    pid,
                    format!("reading {i} reports unknown antenna {}", r.antenna_id),
                ));
            }
            if r.rssi_dbm > 0.0 {
                return Err(Error::validation(
                    pid,
                    format!("reading {i} has positive RSSI {} dBm", r.rssi_dbm),
                ));
            }
            if !(0.0..std::f64::consts::TAU).contains(&r.phase_rad) {
                return Err(Error::validation(
                    pid,
                    format!("reading {i} has phase {} outside [0, 2pi)", r.phase_rad),
                ));
            }
            if r.freq_mhz < config.band_mhz[0] || r.freq_mhz > config.band_mhz[1] {
                return Err(Error::validation(
                    pid,
                    format!("reading {i} has channel {} MHz outside the band", r.freq_mhz),
                ));
            }
            if self.label_at(r.t).is_none() {
                return Err(Error::validation(
                    pid,
                    format!("reading {i} at t={} is not covered by any label interval", r.t),
                ));
            }
        }
        Ok(())
    }

    /// Ground-truth class at time `t`. Intervals are half-open [start, end),
    /// except the final interval which includes its end point.
    pub fn label_at(&self, t: f64) -> Option<Label> {
        let last = self.labels.len().wrapping_sub(1);
        for (i, iv) in self.labels.iter().enumerate() {
            if t >= iv.start && (t < iv.end || (i == last && t <= iv.end)) {
                return Some(iv.label);
            }
        }
        None
    }

    /// Start time of every OutOfBed interval whose predecessor is InBed.
    pub fn ground_truth_exits(&self) -> Vec<f64> {
        self.labels
            .windows(2)
            .filter(|w| w[0].label == Label::InBed && w[1].label == Label::OutOfBed)
            .map(|w| w[1].start)
            .collect()
    }

    /// The OutOfBed interval starting at exit time `t_exit`, if any.
    pub fn exit_interval(&self, t_exit: f64) -> Option<&LabelInterval> {
        self.labels
            .iter()
            .find(|iv| iv.label == Label::OutOfBed && iv.start == t_exit)
    }

    /// Reads-per-second over consecutive windows of `window` seconds,
    /// spanning from the first to the last reading.
    pub fn effective_rate(&self, window: f64) -> Vec<f64> {
        assert!(window > 0.0, "window must be positive");
        if self.readings.is_empty() {
            return Vec::new();
        }
        let t0 = self.readings[0].t;
        let t_last = self.readings.last().unwrap().t;
        let n_windows = (((t_last - t0) / window).ceil() as usize).max(1);
        let mut counts = vec![0usize; n_windows];
        for r in &self.readings {
            let idx = (((r.t - t0) / window).floor() as usize).min(n_windows - 1);
            counts[idx] += 1;
        }
        counts.into_iter().map(|c| c as f64 / window).collect()
    }

    /// Total time span covered by the label intervals.
    pub fn duration(&self) -> f64 {
        match (self.labels.first(), self.labels.last()) {
            (Some(a), Some(b)) => b.end - a.start,
            _ => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deployment() -> DeploymentConfig {
        DeploymentConfig {
            antennas: vec![
                Antenna { id: 1, position: [0.0; 3], boresight: [0.0, 0.0, -1.0] },
                Antenna { id: 2, position: [1.0, 0.0, 0.0], boresight: [0.0, 0.0, -1.0] },
                Antenna { id: 3, position: [0.0, 1.0, 0.0], boresight: [0.0, 0.0, -1.0] },
            ],
            band_mhz: [920.0, 926.0],
            reader_power_w: 1.0,
        }
    }

    fn reading(t: f64, antenna_id: u8) -> TagReading {
        TagReading {
            t,
            antenna_id,
            rssi_dbm: -60.0,
            phase_rad: 1.0,
            freq_mhz: 922.5,
            tag_id: TagId::Id1,
        }
    }

    fn record(readings: Vec<TagReading>, labels: Vec<LabelInterval>) -> PatientRecord {
        PatientRecord { patient_id: 0, readings, labels }
    }

    #[test]
    fn exits_single_transition() {
        let r = record(
            vec![],
            vec![
                LabelInterval { start: 0.0, end: 100.0, label: Label::InBed },
                LabelInterval { start: 100.0, end: 160.0, label: Label::OutOfBed },
                LabelInterval { start: 160.0, end: 400.0, label: Label::InBed },
            ],
        );
        assert_eq!(r.ground_truth_exits(), vec![100.0]);
    }

    #[test]
    fn exits_all_in_bed() {
        let r = record(
            vec![],
            vec![LabelInterval { start: 0.0, end: 50.0, label: Label::InBed }],
        );
        assert!(r.ground_truth_exits().is_empty());
    }

    #[test]
    fn exits_match_brute_force_adjacency_count() {
        // Brute force over intervals: count InBed followed by OutOfBed.
        let labels = vec![
            LabelInterval { start: 0.0, end: 10.0, label: Label::InBed },
            LabelInterval { start: 10.0, end: 20.0, label: Label::OutOfBed },
            LabelInterval { start: 20.0, end: 30.0, label: Label::InBed },
            LabelInterval { start: 30.0, end: 40.0, label: Label::OutOfBed },
            LabelInterval { start: 40.0, end: 50.0, label: Label::InBed },
        ];
        let mut brute = 0;
        for i in 1..labels.len() {
            if labels[i - 1].label == Label::InBed && labels[i].label == Label::OutOfBed {
                brute += 1;
            }
        }
        let r = record(vec![], labels);
        assert_eq!(r.ground_truth_exits().len(), brute);
    }

    #[test]
    fn effective_rate_uniform_stream() {
        // 100 readings uniformly spread over 10 s -> ten windows of 10 reads/s.
        let readings: Vec<TagReading> = (0..100).map(|i| reading(i as f64 * 0.1, 1)).collect();
        let labels = vec![LabelInterval { start: 0.0, end: 10.0, label: Label::InBed }];
        let r = record(readings, labels);
        let rates = r.effective_rate(1.0);
        assert_eq!(rates.len(), 10);
        for v in rates {
            assert_eq!(v, 10.0);
        }
    }

    #[test]
    fn effective_rate_empty_record() {
        let r = record(vec![], vec![]);
        assert!(r.effective_rate(1.0).is_empty());
    }

    #[test]
    fn validate_rejects_decreasing_timestamps() {
        let mut r = record(
            vec![reading(1.0, 1), reading(0.5, 1)],
            vec![LabelInterval { start: 0.0, end: 2.0, label: Label::InBed }],
        );
        let err = r.validate(&deployment()).unwrap_err();
        assert!(err.to_string().contains("timestamp decreases"));
    }

    #[test]
    fn validate_rejects_unknown_antenna() {
        let mut r = record(
            vec![reading(0.5, 9)],
            vec![LabelInterval { start: 0.0, end: 2.0, label: Label::InBed }],
        );
        let err = r.validate(&deployment()).unwrap_err();
        assert!(err.to_string().contains("unknown antenna"));
    }

    #[test]
    fn validate_rejects_label_gap() {
        let mut r = record(
            vec![reading(5.0, 1)],
            vec![
                LabelInterval { start: 0.0, end: 2.0, label: Label::InBed },
                LabelInterval { start: 8.0, end: 9.0, label: Label::OutOfBed },
            ],
        );
        let err = r.validate(&deployment()).unwrap_err();
        assert!(err.to_string().contains("not covered"));
    }

    #[test]
    fn validate_sorts_equal_timestamps_by_antenna() {
        let mut r = record(
            vec![reading(1.0, 3), reading(1.0, 1)],
            vec![LabelInterval { start: 0.0, end: 2.0, label: Label::InBed }],
        );
        r.validate(&deployment()).unwrap();
        assert_eq!(r.readings[0].antenna_id, 1);
        assert_eq!(r.readings[1].antenna_id, 3);
    }

    #[test]
    fn label_at_covers_final_interval_end() {
        let r = record(
            vec![],
            vec![
                LabelInterval { start: 0.0, end: 1.0, label: Label::InBed },
                LabelInterval { start: 1.0, end: 2.0, label: Label::OutOfBed },
            ],
        );
        assert_eq!(r.label_at(0.0), Some(Label::InBed));
        assert_eq!(r.label_at(1.0), Some(Label::OutOfBed));
        assert_eq!(r.label_at(2.0), Some(Label::OutOfBed));
        assert_eq!(r.label_at(2.5), None);
    }
}
