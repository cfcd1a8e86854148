//! Fixed-time sliding-window segmentation and the engineered per-segment
//! feature set.
//!
//! A segment `S_i` holds the readings in `(end_time - segment_len, end_time]`;
//! the extended segment spans the trailing `3 * segment_len` and is split into
//! three equal sub-segments, of which the last equals `S_i` (only the first
//! two contribute features). Every feature is a pure function of the segment,
//! so repeated extraction is byte-identical.

mod normalize;

pub use normalize::Normalizer;

use serde::{Deserialize, Serialize};

use crate::data::{Label, PatientRecord, TagId, TagReading};
use crate::util::{fnv1a64, mean, median, std_dev, wrap_to_pi};

/// Whether tag identity modulation participates in the features.
///
/// `Tag` merges the two identifiers into one; `IdSensor` keeps them apart and
/// adds the identity block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "tag")]
    Tag,
    #[serde(rename = "idsensor")]
    IdSensor,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Tag => write!(f, "tag"),
            Mode::IdSensor => write!(f, "idsensor"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    /// Segment length in seconds.
    pub segment_len_s: f64,
    /// Spacing between consecutive segment end times, seconds.
    pub step_s: f64,
    /// Extended-segment multiplier; fixed at 3.
    pub extended_factor: u32,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig { segment_len_s: 2.0, step_s: 0.5, extended_factor: 3 }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.segment_len_s > 0.0) || !(self.step_s > 0.0) {
            return Err(crate::Error::Config(
                "segment_len_s and step_s must be positive".into(),
            ));
        }
        if self.extended_factor != 3 {
            return Err(crate::Error::Config("extended_factor is fixed at 3".into()));
        }
        Ok(())
    }
}

/// One fixed-time window over a record's readings. Index ranges refer into
/// the record's (sorted) reading vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub index: usize,
    pub end_time: f64,
    /// Readings with `t` in `(end_time - segment_len, end_time]`.
    pub core: std::ops::Range<usize>,
    /// Readings with `t` in `(end_time - 3*segment_len, end_time]`.
    pub extended: std::ops::Range<usize>,
    /// Majority ground-truth class of the core readings; `None` when empty.
    pub label: Option<Label>,
}

impl Segment {
    pub fn core_readings<'a>(&self, readings: &'a [TagReading]) -> &'a [TagReading] {
        &readings[self.core.clone()]
    }

    pub fn extended_readings<'a>(&self, readings: &'a [TagReading]) -> &'a [TagReading] {
        &readings[self.extended.clone()]
    }

    pub fn is_empty(&self) -> bool {
        self.core.is_empty()
    }
}

/// Emit segments at `end_time = t0 + n * step` for n = 1..=N, where N covers
/// the full stream. Empty segments are emitted with `label = None`.
pub fn segment_stream(record: &PatientRecord, cfg: &SegmentationConfig) -> Vec<Segment> {
    cfg.validate().expect("invalid segmentation config");
    let readings = &record.readings;
    if readings.is_empty() {
        return Vec::new();
    }
    let t0 = readings[0].t;
    let t_last = readings[readings.len() - 1].t;
    let n_segments = (((t_last - t0) / cfg.step_s).ceil() as usize).max(1);
    let ext_len = cfg.segment_len_s * cfg.extended_factor as f64;

    let mut segments = Vec::with_capacity(n_segments);
    for n in 1..=n_segments {
        let end_time = t0 + n as f64 * cfg.step_s;
        let core = half_open_range(readings, end_time - cfg.segment_len_s, end_time);
        let extended = half_open_range(readings, end_time - ext_len, end_time);
        let label = majority_label(record, &readings[core.clone()]);
        segments.push(Segment { index: n - 1, end_time, core, extended, label });
    }
    segments
}

/// Indices of readings with t in `(lo, hi]`.
fn half_open_range(readings: &[TagReading], lo: f64, hi: f64) -> std::ops::Range<usize> {
    let start = readings.partition_point(|r| r.t <= lo);
    let end = readings.partition_point(|r| r.t <= hi);
    start..end
}

/// Majority class of the readings; ties resolve to `InBed`.
fn majority_label(record: &PatientRecord, readings: &[TagReading]) -> Option<Label> {
    if readings.is_empty() {
        return None;
    }
    let out = readings
        .iter()
        .filter(|r| record.label_at(r.t) == Some(Label::OutOfBed))
        .count();
    if 2 * out > readings.len() {
        Some(Label::OutOfBed)
    } else {
        Some(Label::InBed)
    }
}

/// Same-channel consecutive-read phase rates for one antenna, rad/s.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CfprSeries {
    pub rates: Vec<f64>,
    /// Consecutive same-channel pairs discarded because their timestamps
    /// coincide.
    pub skipped_zero_dt: usize,
}

/// For each consecutive pair of readings on `antenna_id` that share the same
/// channel frequency, emit the wrap-corrected phase difference (mapped to
/// [-pi, pi)) divided by the time gap. Pairs on different channels are
/// skipped; zero-gap pairs are skipped and counted.
pub fn compute_cfpr(readings: &[TagReading], antenna_id: u8) -> CfprSeries {
    let mut series = CfprSeries::default();
    let mut prev: Option<&TagReading> = None;
    for r in readings.iter().filter(|r| r.antenna_id == antenna_id) {
        if let Some(p) = prev {
            if p.freq_mhz == r.freq_mhz {
                let dt = r.t - p.t;
                if dt > 0.0 {
                    series.rates.push(wrap_to_pi(r.phase_rad - p.phase_rad) / dt);
                } else {
                    series.skipped_zero_dt += 1;
                }
            }
        }
        prev = Some(r);
    }
    series
}

/// 1 iff the timestamp of the maximum RSSI on `antenna_id` is later than the
/// timestamp of the minimum; ties on equal RSSI keep the first occurrence.
/// No readings on the antenna imputes 0 (the presence bit records absence).
pub fn moving_flag(readings: &[TagReading], antenna_id: u8) -> f64 {
    let mut t_max: Option<(f64, f64)> = None; // (rssi, t)
    let mut t_min: Option<(f64, f64)> = None;
    for r in readings.iter().filter(|r| r.antenna_id == antenna_id) {
        match t_max {
            Some((v, _)) if r.rssi_dbm <= v => {}
            _ => t_max = Some((r.rssi_dbm, r.t)),
        }
        match t_min {
            Some((v, _)) if r.rssi_dbm >= v => {}
            _ => t_min = Some((r.rssi_dbm, r.t)),
        }
    }
    match (t_max, t_min) {
        (Some((_, tmax)), Some((_, tmin))) if tmax > tmin => 1.0,
        _ => 0.0,
    }
}

/// Relative read counts per antenna, the majority-antenna one-hot and the
/// most-recent-antenna one-hot. Empty segments produce zero vectors.
pub fn event_features(readings: &[TagReading], antenna_ids: &[u8]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let a = antenna_ids.len();
    let mut rc = vec![0.0; a];
    let mut omega = vec![0.0; a];
    let mut aid_last = vec![0.0; a];
    if readings.is_empty() {
        return (rc, omega, aid_last);
    }
    for r in readings {
        if let Some(k) = antenna_ids.iter().position(|&id| id == r.antenna_id) {
            rc[k] += 1.0;
        }
    }
    let total: f64 = rc.iter().sum();
    if total > 0.0 {
        for v in rc.iter_mut() {
            *v /= total;
        }
    }
    // argmax with ties resolved to the lowest antenna id (ids are ascending)
    let mut best = 0;
    for k in 1..a {
        if rc[k] > rc[best] {
            best = k;
        }
    }
    omega[best] = 1.0;
    let last = readings.last().unwrap();
    if let Some(k) = antenna_ids.iter().position(|&id| id == last.antenna_id) {
        aid_last[k] = 1.0;
    }
    (rc, omega, aid_last)
}

/// Names and dimensionality of the feature vector for a deployment and mode.
/// The layout is identical for every segment of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub mode: Mode,
    pub antenna_ids: Vec<u8>,
    pub names: Vec<String>,
}

impl FeatureLayout {
    pub fn new(mode: Mode, antenna_ids: &[u8]) -> Self {
        let mut names = vec![
            "seg_nonempty".to_string(),
            "rssi_last".to_string(),
            "phase_last".to_string(),
        ];
        for &k in antenna_ids {
            for stat in ["rssi_mean", "rssi_max", "rssi_min", "rssi_std", "moving", "rssi_present"] {
                names.push(format!("a{k}_{stat}"));
            }
        }
        for &k in antenna_ids {
            for stat in ["sub1_mean", "sub1_present", "sub2_mean", "sub2_present"] {
                names.push(format!("a{k}_{stat}"));
            }
        }
        for &k in antenna_ids {
            for stat in ["cfpr_median", "cfpr_abs_sum", "cfpr_abs_std", "cfpr_present"] {
                names.push(format!("a{k}_{stat}"));
            }
        }
        for &k in antenna_ids {
            names.push(format!("a{k}_rc"));
        }
        for &k in antenna_ids {
            names.push(format!("a{k}_omega"));
        }
        for &k in antenna_ids {
            names.push(format!("a{k}_aid_last"));
        }
        if mode == Mode::IdSensor {
            names.push("tag_last".to_string());
            names.push("ri_id1".to_string());
            names.push("ri_id2".to_string());
            for id in [1u8, 2u8] {
                for &k in antenna_ids {
                    for stat in
                        ["rssi_mean", "rssi_max", "rssi_min", "rssi_std", "moving", "rssi_present"]
                    {
                        names.push(format!("id{id}_a{k}_{stat}"));
                    }
                }
            }
        }
        FeatureLayout { mode, antenna_ids: antenna_ids.to_vec(), names }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// Stable identifier of the layout; embedded in trained models so that a
    /// model refuses feature input produced under a different layout.
    pub fn signature(&self) -> u64 {
        fnv1a64(format!("{}|{}", self.mode, self.names.join(",")).as_bytes())
    }
}

/// Per-antenna RSSI statistics block: mean, max, min, std, moving flag and a
/// presence bit. Absent data imputes zeros with presence = 0.
fn rssi_block(readings: &[TagReading], antenna_id: u8, out: &mut Vec<f64>) {
    let values: Vec<f64> = readings
        .iter()
        .filter(|r| r.antenna_id == antenna_id)
        .map(|r| r.rssi_dbm)
        .collect();
    if values.is_empty() {
        out.extend_from_slice(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        return;
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    out.push(mean(&values));
    out.push(max);
    out.push(min);
    out.push(std_dev(&values));
    out.push(moving_flag(readings, antenna_id));
    out.push(1.0);
}

/// Extract the full engineered feature vector for one segment.
pub fn extract_features(
    record: &PatientRecord,
    segment: &Segment,
    cfg: &SegmentationConfig,
    layout: &FeatureLayout,
) -> Vec<f64> {
    let readings = &record.readings;
    let core = segment.core_readings(readings);
    let extended = segment.extended_readings(readings);
    let antenna_ids = &layout.antenna_ids;
    let mut out = Vec::with_capacity(layout.dim());

    // Most-recent-reading block.
    out.push(if core.is_empty() { 0.0 } else { 1.0 });
    out.push(core.last().map_or(0.0, |r| r.rssi_dbm));
    out.push(core.last().map_or(0.0, |r| r.phase_rad));

    // Per-antenna RSSI statistics over the core segment.
    for &k in antenna_ids {
        rssi_block(core, k, &mut out);
    }

    // Mean RSSI of the first two thirds of the extended segment, per antenna.
    let d = cfg.segment_len_s;
    let end = segment.end_time;
    for &k in antenna_ids {
        for (lo, hi) in [(end - 3.0 * d, end - 2.0 * d), (end - 2.0 * d, end - d)] {
            let vals: Vec<f64> = extended
                .iter()
                .filter(|r| r.antenna_id == k && r.t > lo && r.t <= hi)
                .map(|r| r.rssi_dbm)
                .collect();
            if vals.is_empty() {
                out.push(0.0);
                out.push(0.0);
            } else {
                out.push(mean(&vals));
                out.push(1.0);
            }
        }
    }

    // Phase-rate block per antenna.
    for &k in antenna_ids {
        let series = compute_cfpr(core, k);
        if series.rates.is_empty() {
            out.extend_from_slice(&[0.0, 0.0, 0.0, 0.0]);
        } else {
            let abs: Vec<f64> = series.rates.iter().map(|v| v.abs()).collect();
            out.push(median(&series.rates));
            out.push(abs.iter().sum());
            out.push(std_dev(&abs));
            out.push(1.0);
        }
    }

    // Event block.
    let (rc, omega, aid_last) = event_features(core, antenna_ids);
    out.extend_from_slice(&rc);
    out.extend_from_slice(&omega);
    out.extend_from_slice(&aid_last);

    // Identity block.
    if layout.mode == Mode::IdSensor {
        out.push(core.last().map_or(0.0, |r| r.tag_id.code() as f64));
        if core.is_empty() {
            out.push(0.0);
            out.push(0.0);
        } else {
            let n1 = core.iter().filter(|r| r.tag_id == TagId::Id1).count();
            out.push(n1 as f64 / core.len() as f64);
            out.push((core.len() - n1) as f64 / core.len() as f64);
        }
        for id in [TagId::Id1, TagId::Id2] {
            let per_id: Vec<TagReading> =
                core.iter().filter(|r| r.tag_id == id).cloned().collect();
            for &k in antenna_ids {
                rssi_block(&per_id, k, &mut out);
            }
        }
    }

    debug_assert_eq!(out.len(), layout.dim());
    out
}

/// Write a feature matrix as CSV with one named column per dimension plus the
/// leading `end_time_s` and `label` columns.
pub fn write_feature_csv<W: std::io::Write>(
    mut w: W,
    layout: &FeatureLayout,
    rows: &[(f64, Option<Label>, Vec<f64>)],
) -> std::io::Result<()> {
    write!(w, "end_time_s,label")?;
    for name in &layout.names {
        write!(w, ",{name}")?;
    }
    writeln!(w)?;
    for (t, label, values) in rows {
        let label = match label {
            Some(Label::InBed) => "in_bed",
            Some(Label::OutOfBed) => "out_of_bed",
            None => "none",
        };
        write!(w, "{t},{label}")?;
        for v in values {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
