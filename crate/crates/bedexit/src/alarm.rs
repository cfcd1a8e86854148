//! Alarm generation from prediction streams and event-based scoring.
//!
//! Predictions are smoothed by majority vote over consecutive blocks of `k`
//! predictions (the vote of an incomplete trailing block falls back to the
//! previous smoothed state on a tie). An alarm fires at every smoothed
//! in-bed to out-of-bed transition; while the smoothed state stays
//! out-of-bed no further alarm can fire, which is the refractory rule.
//!
//! Scoring is event based. An alarm qualifies for an exit at `t_e` whose
//! out-of-bed interval ends at `t_end` iff its time lies in
//! `[t_e - delta_t, t_end]`. Each exit with at least one qualifying alarm is
//! one true positive (extra qualifying alarms are absorbed, not false
//! positives); an exit with none is a false negative; alarms qualifying for
//! no exit are false positives. The reported delay is
//! `max(0, t_first_qualifying - t_e)`.

use serde::{Deserialize, Serialize};

use crate::data::{Label, PatientRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmConfig {
    /// Majority-vote block length; odd, >= 1.
    pub smoothing_k: usize,
    /// Grace period before an actual exit within which an alarm still counts,
    /// seconds.
    pub delta_t_s: f64,
}

impl Default for AlarmConfig {
    fn default() -> Self {
        AlarmConfig { smoothing_k: 5, delta_t_s: 30.0 }
    }
}

impl AlarmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.smoothing_k == 0 || self.smoothing_k % 2 == 0 {
            return Err(Error::Config("smoothing_k must be odd and >= 1".into()));
        }
        if !(self.delta_t_s > 0.0) {
            return Err(Error::Config("delta_t_s must be positive".into()));
        }
        Ok(())
    }
}

/// One time-stamped class prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub t: f64,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlarmEvent {
    pub t: f64,
    pub patient_id: u32,
}

/// Block-majority smoothing. Each block of `k` consecutive predictions emits
/// one smoothed prediction stamped with the block's last timestamp.
pub fn smooth_predictions(predictions: &[Prediction], k: usize) -> Vec<Prediction> {
    assert!(k >= 1);
    let mut out = Vec::with_capacity(predictions.len() / k + 1);
    let mut state = Label::InBed;
    for block in predictions.chunks(k) {
        let out_votes = block.iter().filter(|p| p.label == Label::OutOfBed).count();
        let in_votes = block.len() - out_votes;
        state = if out_votes > in_votes {
            Label::OutOfBed
        } else if in_votes > out_votes {
            Label::InBed
        } else {
            state
        };
        out.push(Prediction { t: block.last().unwrap().t, label: state });
    }
    out
}

/// Alarms at every smoothed in-bed to out-of-bed transition.
pub fn raise_alarms(
    predictions: &[Prediction],
    cfg: &AlarmConfig,
    patient_id: u32,
) -> Vec<AlarmEvent> {
    let smoothed = smooth_predictions(predictions, cfg.smoothing_k);
    let mut alarms = Vec::new();
    let mut state = Label::InBed;
    for p in &smoothed {
        if state == Label::InBed && p.label == Label::OutOfBed {
            debug_assert!(alarms.last().map_or(true, |a: &AlarmEvent| a.t < p.t));
            alarms.push(AlarmEvent { t: p.t, patient_id });
        }
        state = p.label;
    }
    alarms
}

/// Event counts and per-true-positive delays for one record.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreCounts {
    pub tp: u32,
    pub fp: u32,
    #[serde(rename = "fn")]
    pub fn_: u32,
    pub delays: Vec<f64>,
}

/// Score alarms against a record's ground truth. See the module docs for the
/// qualification rule.
pub fn score_alarms(alarms: &[AlarmEvent], record: &PatientRecord, cfg: &AlarmConfig) -> ScoreCounts {
    let exits = record.ground_truth_exits();
    let mut consumed = vec![false; alarms.len()];
    let mut counts = ScoreCounts::default();
    for &t_exit in &exits {
        let t_end = record
            .exit_interval(t_exit)
            .map(|iv| iv.end)
            .expect("exit start must come from an out-of-bed interval");
        let mut first: Option<f64> = None;
        for (i, a) in alarms.iter().enumerate() {
            if consumed[i] {
                continue;
            }
            if a.t >= t_exit - cfg.delta_t_s && a.t <= t_end {
                consumed[i] = true;
                if first.is_none() {
                    first = Some(a.t);
                }
            }
        }
        match first {
            Some(t_first) => {
                counts.tp += 1;
                counts.delays.push((t_first - t_exit).max(0.0));
            }
            None => counts.fn_ += 1,
        }
    }
    counts.fp = consumed.iter().filter(|&&c| !c).count() as u32;
    counts
}

/// Cumulative fraction of delays at or below each bucket edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayBucket {
    pub edge_s: f64,
    pub cumulative_fraction: f64,
}

/// Empty input yields an empty histogram.
pub fn delay_histogram(delays: &[f64], edges: &[f64]) -> Vec<DelayBucket> {
    if delays.is_empty() {
        return Vec::new();
    }
    let n = delays.len() as f64;
    edges
        .iter()
        .map(|&edge| DelayBucket {
            edge_s: edge,
            cumulative_fraction: delays.iter().filter(|&&d| d <= edge).count() as f64 / n,
        })
        .collect()
}

/// Precision, recall and F-score from event counts. Degenerate denominators
/// yield zero.
pub fn metrics(tp: u32, fp: u32, fn_: u32) -> (f64, f64, f64) {
    let p = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
    let r = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
    let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f)
}

/// Per-patient outcome row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientOutcome {
    pub patient_id: u32,
    /// Ground-truth exits in the record.
    pub actual: u32,
    pub tp: u32,
    pub fp: u32,
    #[serde(rename = "fn")]
    pub fn_: u32,
    pub delays: Vec<f64>,
}

/// Provenance recorded in every emitted report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub mode: String,
    pub classifier: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub meta: ReportMeta,
    pub per_patient: Vec<PatientOutcome>,
    pub tp: u32,
    pub fp: u32,
    #[serde(rename = "fn")]
    pub fn_: u32,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    /// Every true-positive delay, in per-patient order.
    pub delays: Vec<f64>,
}

impl EvaluationReport {
    /// Aggregate counts over folds, then compute the metrics on the totals.
    pub fn from_outcomes(meta: ReportMeta, per_patient: Vec<PatientOutcome>) -> Self {
        let tp = per_patient.iter().map(|p| p.tp).sum();
        let fp = per_patient.iter().map(|p| p.fp).sum();
        let fn_ = per_patient.iter().map(|p| p.fn_).sum();
        let (precision, recall, f_score) = metrics(tp, fp, fn_);
        let delays = per_patient.iter().flat_map(|p| p.delays.iter().cloned()).collect();
        EvaluationReport { meta, per_patient, tp, fp, fn_, precision, recall, f_score, delays }
    }

    pub fn total_actual(&self) -> u32 {
        self.per_patient.iter().map(|p| p.actual).sum()
    }

    /// Aligned-text table with one row per patient and a totals row.
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "{:>10} {:>7} {:>5} {:>5} {:>5}\n",
            "Patient ID", "Actual", "TP", "FP", "FN"
        ));
        for p in &self.per_patient {
            s.push_str(&format!(
                "{:>10} {:>7} {:>5} {:>5} {:>5}\n",
                p.patient_id, p.actual, p.tp, p.fp, p.fn_
            ));
        }
        s.push_str(&format!(
            "{:>10} {:>7} {:>5} {:>5} {:>5}\n",
            "Total",
            self.total_actual(),
            self.tp,
            self.fp,
            self.fn_
        ));
        s.push_str(&format!(
            "precision {:.4}  recall {:.4}  f_score {:.4}\n",
            self.precision, self.recall, self.f_score
        ));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabelInterval;

    fn preds(labels: &[Label]) -> Vec<Prediction> {
        labels
            .iter()
            .enumerate()
            .map(|(i, &label)| Prediction { t: i as f64, label })
            .collect()
    }

    const I: Label = Label::InBed;
    const O: Label = Label::OutOfBed;

    #[test]
    fn single_transition_raises_one_alarm_at_first_out() {
        // Already-smoothed sequence (k = 1): I,I,I,O,O,O.
        let cfg = AlarmConfig { smoothing_k: 1, delta_t_s: 30.0 };
        let alarms = raise_alarms(&preds(&[I, I, I, O, O, O]), &cfg, 0);
        assert_eq!(alarms.len(), 1);
        assert_eq!(alarms[0].t, 3.0);
    }

    #[test]
    fn alternating_raw_sequence_smooths_to_in_bed() {
        // I,O,I,O,I with k = 3: blocks [I,O,I] -> I and [O,I] -> tie -> stays
        // I; zero alarms.
        let cfg = AlarmConfig { smoothing_k: 3, delta_t_s: 30.0 };
        let smoothed = smooth_predictions(&preds(&[I, O, I, O, I]), 3);
        assert!(smoothed.iter().all(|p| p.label == I));
        assert!(raise_alarms(&preds(&[I, O, I, O, I]), &cfg, 0).is_empty());
    }

    #[test]
    fn alarm_count_matches_transition_count_of_smoothed_stream() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let n = rng.random_range(1..120);
            let labels: Vec<Label> =
                (0..n).map(|_| if rng.random::<bool>() { O } else { I }).collect();
            let k = [1, 3, 5][rng.random_range(0..3)];
            let cfg = AlarmConfig { smoothing_k: k, delta_t_s: 30.0 };
            let p = preds(&labels);
            let alarms = raise_alarms(&p, &cfg, 0);
            // Brute-force oracle: count InBed -> OutOfBed transitions in the
            // smoothed stream, with an implicit leading InBed state.
            let smoothed = smooth_predictions(&p, k);
            let mut prev = I;
            let mut transitions = 0;
            for s in &smoothed {
                if prev == I && s.label == O {
                    transitions += 1;
                }
                prev = s.label;
            }
            assert_eq!(alarms.len(), transitions);
        }
    }

    fn record_with_exit() -> PatientRecord {
        PatientRecord {
            patient_id: 0,
            readings: vec![],
            labels: vec![
                LabelInterval { start: 0.0, end: 100.0, label: I },
                LabelInterval { start: 100.0, end: 160.0, label: O },
                LabelInterval { start: 160.0, end: 300.0, label: I },
            ],
        }
    }

    fn alarm_at(t: f64) -> AlarmEvent {
        AlarmEvent { t, patient_id: 0 }
    }

    #[test]
    fn early_alarm_inside_grace_period_qualifies() {
        let cfg = AlarmConfig::default(); // delta_t 30
        let counts = score_alarms(&[alarm_at(75.0)], &record_with_exit(), &cfg);
        assert_eq!((counts.tp, counts.fp, counts.fn_), (1, 0, 0));
        assert_eq!(counts.delays, vec![0.0]);
    }

    #[test]
    fn alarm_before_grace_period_is_a_false_positive() {
        let cfg = AlarmConfig::default();
        let counts = score_alarms(&[alarm_at(60.0)], &record_with_exit(), &cfg);
        assert_eq!((counts.tp, counts.fp, counts.fn_), (0, 1, 1));
    }

    #[test]
    fn grace_period_boundary_cases() {
        let cfg = AlarmConfig::default();
        // Exactly t_e - delta_t qualifies.
        let counts = score_alarms(&[alarm_at(70.0)], &record_with_exit(), &cfg);
        assert_eq!((counts.tp, counts.fp, counts.fn_), (1, 0, 0));
        // Any earlier does not.
        let counts = score_alarms(&[alarm_at(70.0 - 1e-9)], &record_with_exit(), &cfg);
        assert_eq!((counts.tp, counts.fp, counts.fn_), (0, 1, 1));
    }

    #[test]
    fn delayed_alarm_reports_its_delay() {
        let cfg = AlarmConfig::default();
        let counts = score_alarms(&[alarm_at(107.0)], &record_with_exit(), &cfg);
        assert_eq!(counts.tp, 1);
        assert_eq!(counts.delays, vec![7.0]);
        let hist = delay_histogram(&counts.delays, &[3.0, 10.0]);
        assert_eq!(hist[1].cumulative_fraction, 1.0);
    }

    #[test]
    fn extra_qualifying_alarms_are_absorbed() {
        let cfg = AlarmConfig::default();
        let alarms = [alarm_at(101.0), alarm_at(120.0), alarm_at(150.0)];
        let counts = score_alarms(&alarms, &record_with_exit(), &cfg);
        assert_eq!((counts.tp, counts.fp, counts.fn_), (1, 0, 0));
        assert_eq!(counts.delays, vec![1.0]);
    }

    #[test]
    fn alarm_after_interval_end_is_fp() {
        let cfg = AlarmConfig::default();
        let counts = score_alarms(&[alarm_at(200.0)], &record_with_exit(), &cfg);
        assert_eq!((counts.tp, counts.fp, counts.fn_), (0, 1, 1));
    }

    #[test]
    fn delay_histogram_buckets() {
        let hist = delay_histogram(&[1.0, 2.0, 9.0, 14.0], &[3.0, 10.0]);
        assert_eq!(hist[0].cumulative_fraction, 0.5);
        assert_eq!(hist[1].cumulative_fraction, 0.75);

        let hist = delay_histogram(&[0.0, 0.0], &[3.0, 10.0]);
        assert_eq!(hist[0].cumulative_fraction, 1.0);

        assert!(delay_histogram(&[], &[3.0, 10.0]).is_empty());
    }

    #[test]
    fn metrics_definitions() {
        let (p, r, f) = metrics(6, 2, 3);
        assert!((p - 6.0 / 8.0).abs() < 1e-12);
        assert!((r - 6.0 / 9.0).abs() < 1e-12);
        assert!((f - 2.0 * p * r / (p + r)).abs() < 1e-12);
        assert_eq!(metrics(0, 0, 0), (0.0, 0.0, 0.0));
    }
}
