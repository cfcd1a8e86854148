//! Stream-to-window assembly, per-channel standardization and the seeded,
//! single-threaded training loops for the two network classifiers.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::convlstm::ConvLstmModel;
use super::fcn::FcnModel;
use super::ops::softmax_cross_entropy;
use super::tensor::Tensor;
use crate::data::{Label, PatientRecord, TagId, TagReading};
use crate::error::{Error, Result};
use crate::features::Mode;
use crate::util::derive_seed;

/// Input channels fed to the networks, in order: tag identity, antenna code,
/// RSSI, phase.
pub const CHANNELS: usize = 4;

/// Optimizer and loop settings shared by all trainable models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Windows per optimizer update.
    pub minibatch: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub max_epochs: usize,
    /// Early-stop patience in epochs without validation improvement.
    pub patience: usize,
    pub seed: u64,
    /// Inverse-frequency class weights in the loss.
    pub class_weighted: bool,
    /// L2 penalty (logistic regression only).
    pub l2: f64,
    /// Full-batch iterations for logistic regression.
    pub lr_iters: usize,
    /// Fraction of training windows (or records for the recurrent model)
    /// held out for early stopping.
    pub val_fraction: f64,
    /// Window stride when building dense-labeling training windows.
    pub fcn_stride: usize,
    /// Window stride when building recurrent training window sequences.
    pub convlstm_stride: usize,
    /// Cap on training windows per fold; 0 disables the cap.
    pub max_windows: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            minibatch: 80,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_epochs: 30,
            patience: 10,
            seed: 0,
            class_weighted: true,
            l2: 1e-4,
            lr_iters: 400,
            val_fraction: 0.15,
            fcn_stride: 10,
            convlstm_stride: 2,
            max_windows: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.minibatch < 1 {
            return Err(Error::Config("minibatch must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config("val_fraction must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Per-channel standardization statistics fitted on the training fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: [f64; CHANNELS],
    pub std: [f64; CHANNELS],
}

/// Raw channel values for one reading: the tag identity mapped to {-1, +1}
/// (0 in Tag mode, where the identities are merged), the antenna mapped to a
/// centered integer code, then RSSI and phase.
pub fn reading_channels(r: &TagReading, mode: Mode, antenna_ids: &[u8]) -> [f64; CHANNELS] {
    let tag = match mode {
        Mode::Tag => 0.0,
        Mode::IdSensor => match r.tag_id {
            TagId::Id1 => -1.0,
            TagId::Id2 => 1.0,
        },
    };
    let idx = antenna_ids.iter().position(|&id| id == r.antenna_id).unwrap_or(0) as f64;
    let centered = idx - (antenna_ids.len() as f64 - 1.0) / 2.0;
    [tag, centered, r.rssi_dbm, r.phase_rad]
}

/// Fit channel statistics on training-fold records only.
pub fn fit_channel_stats(
    records: &[&PatientRecord],
    mode: Mode,
    antenna_ids: &[u8],
) -> ChannelStats {
    let mut sum = [0.0; CHANNELS];
    let mut count = 0usize;
    for rec in records {
        for r in &rec.readings {
            let ch = reading_channels(r, mode, antenna_ids);
            for (s, v) in sum.iter_mut().zip(ch) {
                *s += v;
            }
            count += 1;
        }
    }
    let n = count.max(1) as f64;
    let mean = sum.map(|s| s / n);
    let mut var = [0.0; CHANNELS];
    for rec in records {
        for r in &rec.readings {
            let ch = reading_channels(r, mode, antenna_ids);
            for i in 0..CHANNELS {
                var[i] += (ch[i] - mean[i]) * (ch[i] - mean[i]);
            }
        }
    }
    let std = var.map(|v| (v / n).sqrt());
    ChannelStats { mean, std }
}

/// Standardize one reading's channels; zero-variance channels pass through.
pub fn standardize(ch: [f64; CHANNELS], stats: &ChannelStats) -> [f64; CHANNELS] {
    let mut out = ch;
    for i in 0..CHANNELS {
        if stats.std[i] > 0.0 {
            out[i] = (ch[i] - stats.mean[i]) / stats.std[i];
        }
    }
    out
}

fn class_index(label: Label) -> usize {
    match label {
        Label::InBed => 0,
        Label::OutOfBed => 1,
    }
}

/// Inverse-frequency class weights normalized so a balanced set gives 1.0.
pub fn class_weights(class_counts: [usize; 2], enabled: bool) -> [f64; 2] {
    if !enabled {
        return [1.0, 1.0];
    }
    let total = (class_counts[0] + class_counts[1]).max(1) as f64;
    [
        total / (2.0 * class_counts[0].max(1) as f64),
        total / (2.0 * class_counts[1].max(1) as f64),
    ]
}

/// Dense-labeling windows: every reading position in a window is supervised.
#[derive(Debug, Clone)]
pub struct DenseWindowSet {
    pub window: usize,
    pub n: usize,
    /// [n, CHANNELS, window]
    pub x: Vec<f64>,
    /// [n * window] class indices aligned with window positions.
    pub labels: Vec<usize>,
}

impl DenseWindowSet {
    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0usize; 2];
        for &l in &self.labels {
            c[l] += 1;
        }
        c
    }

    /// Gather a minibatch by window indices.
    pub fn batch(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        let w = self.window;
        let stride = CHANNELS * w;
        let mut x = Vec::with_capacity(indices.len() * stride);
        let mut y = Vec::with_capacity(indices.len() * w);
        for &i in indices {
            x.extend_from_slice(&self.x[i * stride..(i + 1) * stride]);
            y.extend_from_slice(&self.labels[i * w..(i + 1) * w]);
        }
        (Tensor::from_vec(&[indices.len(), CHANNELS, w], x), y)
    }
}

/// Build dense windows from whole records; windows never cross records.
pub fn dense_windows(
    records: &[&PatientRecord],
    mode: Mode,
    antenna_ids: &[u8],
    stats: &ChannelStats,
    window: usize,
    stride: usize,
) -> DenseWindowSet {
    assert!(stride >= 1);
    let mut x = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0;
    for rec in records {
        let m = rec.readings.len();
        if m < window {
            continue;
        }
        let mut start = 0;
        while start + window <= m {
            push_window(rec, start, window, mode, antenna_ids, stats, &mut x, &mut labels);
            n += 1;
            start += stride;
        }
    }
    DenseWindowSet { window, n, x, labels }
}

fn push_window(
    rec: &PatientRecord,
    start: usize,
    window: usize,
    mode: Mode,
    antenna_ids: &[u8],
    stats: &ChannelStats,
    x: &mut Vec<f64>,
    labels: &mut Vec<usize>,
) {
    let base = x.len();
    x.resize(base + CHANNELS * window, 0.0);
    for (j, r) in rec.readings[start..start + window].iter().enumerate() {
        let ch = standardize(reading_channels(r, mode, antenna_ids), stats);
        for c in 0..CHANNELS {
            x[base + c * window + j] = ch[c];
        }
        labels.push(class_index(rec.label_at(r.t).expect("validated record")));
    }
}

/// Chronological sliding windows for the recurrent model; one label and one
/// timestamp (the last reading's) per window.
#[derive(Debug, Clone)]
pub struct SeqWindowSet {
    pub window: usize,
    pub n: usize,
    /// [n, CHANNELS, window]
    pub x: Vec<f64>,
    pub labels: Vec<usize>,
    pub times: Vec<f64>,
}

pub fn seq_windows(
    rec: &PatientRecord,
    mode: Mode,
    antenna_ids: &[u8],
    stats: &ChannelStats,
    window: usize,
    stride: usize,
) -> SeqWindowSet {
    assert!(stride >= 1);
    let mut set = SeqWindowSet { window, n: 0, x: Vec::new(), labels: Vec::new(), times: Vec::new() };
    let m = rec.readings.len();
    if m < window {
        return set;
    }
    let mut start = 0;
    while start + window <= m {
        let base = set.x.len();
        set.x.resize(base + CHANNELS * window, 0.0);
        for (j, r) in rec.readings[start..start + window].iter().enumerate() {
            let ch = standardize(reading_channels(r, mode, antenna_ids), stats);
            for c in 0..CHANNELS {
                set.x[base + c * window + j] = ch[c];
            }
        }
        let last = &rec.readings[start + window - 1];
        set.labels.push(class_index(rec.label_at(last.t).expect("validated record")));
        set.times.push(last.t);
        set.n += 1;
        start += stride;
    }
    set
}

/// Loss-curve entry; validation loss falls back to the training loss when no
/// validation split exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

fn snapshot(params: &mut [&mut super::tensor::Param]) -> Vec<Vec<f64>> {
    params.iter().map(|p| p.value.clone()).collect()
}

fn restore(params: &mut [&mut super::tensor::Param], snap: &[Vec<f64>]) {
    for (p, s) in params.iter_mut().zip(snap) {
        p.value.copy_from_slice(s);
    }
}

/// [B, C, W] logits -> [B*W, C] rows for the cross-entropy.
pub fn dense_logits_to_rows(logits: &Tensor) -> Tensor {
    let (b, c, w) = (logits.shape[0], logits.shape[1], logits.shape[2]);
    let mut rows = vec![0.0; b * c * w];
    for bi in 0..b {
        for ci in 0..c {
            for wi in 0..w {
                rows[(bi * w + wi) * c + ci] = logits.data[(bi * c + ci) * w + wi];
            }
        }
    }
    Tensor::from_vec(&[b * w, c], rows)
}

/// Inverse of [`dense_logits_to_rows`] for gradients.
pub fn rows_to_dense_grad(rows: &Tensor, b: usize, c: usize, w: usize) -> Tensor {
    let mut grad = vec![0.0; b * c * w];
    for bi in 0..b {
        for ci in 0..c {
            for wi in 0..w {
                grad[(bi * c + ci) * w + wi] = rows.data[(bi * w + wi) * c + ci];
            }
        }
    }
    Tensor::from_vec(&[b, c, w], grad)
}

/// Train the dense-labeling network. Deterministic given the seed: shuffles,
/// dropout masks and initialization all derive from it. Returns the loss
/// curve; the model is left at its best-validation snapshot.
pub fn train_fcn(
    model: &mut FcnModel,
    data: &DenseWindowSet,
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    if data.n == 0 {
        return Err(Error::Training("no training windows".into()));
    }
    let weights = class_weights(data.class_counts(), cfg.class_weighted);
    let mut order: Vec<usize> = (0..data.n).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "fcn-shuffle", 0));
    order.shuffle(&mut shuffle_rng);
    if cfg.max_windows > 0 && order.len() > cfg.max_windows {
        order.truncate(cfg.max_windows);
    }
    let n_val = ((order.len() as f64) * cfg.val_fraction).floor() as usize;
    let (val_idx, train_idx) = order.split_at(n_val);
    let val_idx = val_idx.to_vec();
    let mut train_idx = train_idx.to_vec();
    if train_idx.is_empty() {
        return Err(Error::Training("validation split consumed every window".into()));
    }

    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "fcn-dropout", 0));
    let mut adam = Adam::new(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    let mut curve = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_snapshot: Option<Vec<Vec<f64>>> = None;
    let mut bad_epochs = 0usize;

    for epoch in 0..cfg.max_epochs {
        train_idx.shuffle(&mut shuffle_rng);
        let mut train_loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in train_idx.chunks(cfg.minibatch) {
            let (x, y) = data.batch(chunk);
            let logits = model.forward(&x, true, &mut dropout_rng)?;
            let rows = dense_logits_to_rows(&logits);
            let (loss, grad_rows) = softmax_cross_entropy(&rows, &y, &weights)?;
            if !loss.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite loss at epoch {epoch}, batch {batches}"
                )));
            }
            let grad = rows_to_dense_grad(&grad_rows, chunk.len(), model.cfg.classes, data.window);
            model.zero_grads();
            model.backward(&grad);
            adam.step(&mut model.params_mut());
            train_loss_sum += loss;
            batches += 1;
        }
        let train_loss = train_loss_sum / batches.max(1) as f64;
        let val_loss = if val_idx.is_empty() {
            train_loss
        } else {
            fcn_eval_loss(model, data, &val_idx, cfg.minibatch, &weights)?
        };
        curve.push(EpochStats { epoch, train_loss, val_loss });
        if val_loss < best_val - 1e-12 {
            best_val = val_loss;
            best_snapshot = Some(snapshot(&mut model.params_mut()));
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs > cfg.patience {
                break;
            }
        }
    }
    if let Some(snap) = best_snapshot {
        restore(&mut model.params_mut(), &snap);
    }
    Ok(curve)
}

fn fcn_eval_loss(
    model: &mut FcnModel,
    data: &DenseWindowSet,
    indices: &[usize],
    minibatch: usize,
    weights: &[f64; 2],
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0); // inert: dropout is identity in eval mode
    let mut sum = 0.0;
    let mut batches = 0usize;
    for chunk in indices.chunks(minibatch) {
        let (x, y) = data.batch(chunk);
        let logits = model.forward(&x, false, &mut rng)?;
        let rows = dense_logits_to_rows(&logits);
        let (loss, _) = softmax_cross_entropy(&rows, &y, weights)?;
        sum += loss;
        batches += 1;
    }
    Ok(sum / batches.max(1) as f64)
}

/// Train the recurrent model with truncated backpropagation through time.
///
/// Records are processed one lane at a time; each record's window sequence is
/// cut into chunks of `unroll` windows with LSTM state carried across chunks
/// and reset at record boundaries. Gradients accumulate over
/// `minibatch / unroll` chunks per optimizer step.
pub fn train_convlstm(
    model: &mut ConvLstmModel,
    records: &[SeqWindowSet],
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    let usable: Vec<&SeqWindowSet> = records.iter().filter(|r| r.n > 0).collect();
    if usable.is_empty() {
        return Err(Error::Training("no training window sequences".into()));
    }
    let mut counts = [0usize; 2];
    for r in &usable {
        for &l in &r.labels {
            counts[l] += 1;
        }
    }
    let weights = class_weights(counts, cfg.class_weighted);

    // Record-level validation split keeps state handling honest.
    let mut order: Vec<usize> = (0..usable.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "convlstm-shuffle", 0));
    order.shuffle(&mut shuffle_rng);
    let n_val = ((usable.len() as f64) * cfg.val_fraction).floor() as usize;
    let (val_recs, train_recs) = order.split_at(n_val);
    let val_recs = val_recs.to_vec();
    let mut train_recs = train_recs.to_vec();
    if train_recs.is_empty() {
        return Err(Error::Training("validation split consumed every record".into()));
    }

    let unroll = model.cfg.unroll.max(1);
    let chunks_per_step = (cfg.minibatch / unroll).max(1);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "convlstm-dropout", 0));
    let mut adam = Adam::new(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    let mut curve = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_snapshot: Option<Vec<Vec<f64>>> = None;
    let mut bad_epochs = 0usize;

    for epoch in 0..cfg.max_epochs {
        train_recs.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut chunk_count = 0usize;
        let mut pending = 0usize;
        model.zero_grads();
        for &ri in &train_recs {
            let rec = usable[ri];
            let mut state = model.fresh_state(1);
            let mut start = 0;
            while start < rec.n {
                let t = unroll.min(rec.n - start);
                let x = chunk_tensor(rec, start, t);
                let y = &rec.labels[start..start + t];
                let logits = model.forward_chunk(&x, &mut state, true, &mut dropout_rng)?;
                let rows = Tensor::from_vec(&[t, model.cfg.classes], logits.data.clone());
                let (loss, grad_rows) = softmax_cross_entropy(&rows, y, &weights)?;
                if !loss.is_finite() {
                    return Err(Error::Training(format!(
                        "non-finite loss at epoch {epoch}, chunk {chunk_count}"
                    )));
                }
                let grad = Tensor::from_vec(&[1, t, model.cfg.classes], grad_rows.data);
                model.backward(&grad);
                loss_sum += loss;
                chunk_count += 1;
                pending += 1;
                if pending == chunks_per_step {
                    adam.step(&mut model.params_mut());
                    model.zero_grads();
                    pending = 0;
                }
                start += t;
            }
        }
        if pending > 0 {
            adam.step(&mut model.params_mut());
            model.zero_grads();
        }
        let train_loss = loss_sum / chunk_count.max(1) as f64;
        let val_loss = if val_recs.is_empty() {
            train_loss
        } else {
            let mut sum = 0.0;
            let mut n = 0usize;
            for &ri in &val_recs {
                let (l, c) = convlstm_eval_loss(model, usable[ri], &weights)?;
                sum += l;
                n += c;
            }
            sum / n.max(1) as f64
        };
        curve.push(EpochStats { epoch, train_loss, val_loss });
        if val_loss < best_val - 1e-12 {
            best_val = val_loss;
            best_snapshot = Some(snapshot(&mut model.params_mut()));
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs > cfg.patience {
                break;
            }
        }
    }
    if let Some(snap) = best_snapshot {
        restore(&mut model.params_mut(), &snap);
    }
    Ok(curve)
}

fn chunk_tensor(rec: &SeqWindowSet, start: usize, t: usize) -> Tensor {
    let stride = CHANNELS * rec.window;
    let data = rec.x[start * stride..(start + t) * stride].to_vec();
    Tensor::from_vec(&[1, t, CHANNELS, rec.window], data)
}

fn convlstm_eval_loss(
    model: &mut ConvLstmModel,
    rec: &SeqWindowSet,
    weights: &[f64; 2],
) -> Result<(f64, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let unroll = model.cfg.unroll.max(1);
    let mut state = model.fresh_state(1);
    let mut sum = 0.0;
    let mut chunks = 0usize;
    let mut start = 0;
    while start < rec.n {
        let t = unroll.min(rec.n - start);
        let x = chunk_tensor(rec, start, t);
        let logits = model.forward_chunk(&x, &mut state, false, &mut rng)?;
        let rows = Tensor::from_vec(&[t, model.cfg.classes], logits.data);
        let (loss, _) = softmax_cross_entropy(&rows, &rec.labels[start..start + t], weights)?;
        sum += loss;
        chunks += 1;
        start += t;
    }
    Ok((sum, chunks))
}

/// Streaming per-window predictions for one record with a fresh state, so
/// cross-patient carryover cannot happen.
pub fn convlstm_predict(model: &mut ConvLstmModel, rec: &SeqWindowSet) -> Result<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let unroll = model.cfg.unroll.max(1);
    let mut state = model.fresh_state(1);
    let mut classes = Vec::with_capacity(rec.n);
    let mut start = 0;
    while start < rec.n {
        let t = unroll.min(rec.n - start);
        let x = chunk_tensor(rec, start, t);
        let logits = model.forward_chunk(&x, &mut state, false, &mut rng)?;
        for i in 0..t {
            let a = logits.data[i * model.cfg.classes];
            let b = logits.data[i * model.cfg.classes + 1];
            classes.push(if b > a { 1 } else { 0 });
        }
        start += t;
    }
    Ok(classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabelInterval;
    use crate::nn::fcn::FcnConfig;

    fn make_record(n: usize, flip_at: usize) -> PatientRecord {
        let readings: Vec<TagReading> = (0..n)
            .map(|i| TagReading {
                t: i as f64 * 0.1,
                antenna_id: if i < flip_at { 1 } else { 3 },
                rssi_dbm: if i < flip_at { -50.0 } else { -68.0 },
                phase_rad: (i as f64 * 0.31) % std::f64::consts::TAU,
                freq_mhz: 922.5,
                tag_id: if i < flip_at { TagId::Id2 } else { TagId::Id1 },
            })
            .collect();
        let t_flip = flip_at as f64 * 0.1;
        let t_end = n as f64 * 0.1;
        PatientRecord {
            patient_id: 0,
            readings,
            labels: vec![
                LabelInterval { start: 0.0, end: t_flip, label: Label::InBed },
                LabelInterval { start: t_flip, end: t_end, label: Label::OutOfBed },
            ],
        }
    }

    #[test]
    fn constant_channel_passes_through() {
        let rec = make_record(40, 20);
        let stats = fit_channel_stats(&[&rec], Mode::Tag, &[1, 2, 3]);
        // Tag mode merges identities: the tag channel is constant 0.
        assert_eq!(stats.std[0], 0.0);
        let ch = standardize(reading_channels(&rec.readings[0], Mode::Tag, &[1, 2, 3]), &stats);
        assert_eq!(ch[0], 0.0);
    }

    #[test]
    fn standardized_rssi_has_zero_mean_on_train_fold() {
        let rec = make_record(200, 100);
        let stats = fit_channel_stats(&[&rec], Mode::IdSensor, &[1, 2, 3]);
        let mut sum = 0.0;
        for r in &rec.readings {
            sum += standardize(reading_channels(r, Mode::IdSensor, &[1, 2, 3]), &stats)[2];
        }
        assert!((sum / rec.readings.len() as f64).abs() < 1e-9);
    }

    #[test]
    fn channel_stats_leakage_detector() {
        let a = make_record(100, 50);
        let b = make_record(100, 20);
        let train_only = fit_channel_stats(&[&a], Mode::IdSensor, &[1, 2, 3]);
        let with_test = fit_channel_stats(&[&a, &b], Mode::IdSensor, &[1, 2, 3]);
        assert_ne!(train_only.mean, with_test.mean);
    }

    #[test]
    fn loss_decreases_on_synthetic_set() {
        let rec = make_record(210, 100);
        let stats = fit_channel_stats(&[&rec], Mode::IdSensor, &[1, 2, 3]);
        let data = dense_windows(&[&rec], Mode::IdSensor, &[1, 2, 3], &stats, 10, 1);
        assert!(data.n >= 200);
        let mut model = FcnModel::new(FcnConfig { width: 8, ..FcnConfig::default() }, 0);
        let cfg = TrainConfig { max_epochs: 5, val_fraction: 0.0, seed: 1, ..TrainConfig::default() };
        let curve = train_fcn(&mut model, &data, &cfg).unwrap();
        assert!(curve.len() == 5);
        assert!(curve.last().unwrap().train_loss < curve[0].train_loss);
    }

    #[test]
    fn zero_lr_leaves_parameters_bit_identical() {
        let rec = make_record(60, 30);
        let stats = fit_channel_stats(&[&rec], Mode::IdSensor, &[1, 2, 3]);
        let data = dense_windows(&[&rec], Mode::IdSensor, &[1, 2, 3], &stats, 10, 2);
        let mut model = FcnModel::new(FcnConfig { width: 4, ..FcnConfig::default() }, 0);
        let before: Vec<Vec<f64>> = model.params_mut().iter().map(|p| p.value.clone()).collect();
        let cfg = TrainConfig {
            lr: 0.0,
            max_epochs: 2,
            val_fraction: 0.0,
            ..TrainConfig::default()
        };
        train_fcn(&mut model, &data, &cfg).unwrap();
        let after: Vec<Vec<f64>> = model.params_mut().iter().map(|p| p.value.clone()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn memorizes_a_small_window_set() {
        // Overfit oracle: a handful of windows must be memorized to >99%
        // sample accuracy well inside 500 epochs.
        let rec = make_record(200, 100);
        let stats = fit_channel_stats(&[&rec], Mode::IdSensor, &[1, 2, 3]);
        let data = dense_windows(&[&rec], Mode::IdSensor, &[1, 2, 3], &stats, 10, 10);
        assert_eq!(data.n, 20);
        let mut model = FcnModel::new(FcnConfig { width: 8, ..FcnConfig::default() }, 0);
        let cfg = TrainConfig {
            max_epochs: 500,
            patience: 500,
            val_fraction: 0.0,
            lr: 3e-3,
            seed: 2,
            ..TrainConfig::default()
        };
        train_fcn(&mut model, &data, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let all: Vec<usize> = (0..data.n).collect();
        let (x, y) = data.batch(&all);
        let logits = model.forward(&x, false, &mut rng).unwrap();
        let rows = dense_logits_to_rows(&logits);
        let mut correct = 0;
        for (i, &target) in y.iter().enumerate() {
            let pred = if rows.data[i * 2 + 1] > rows.data[i * 2] { 1 } else { 0 };
            if pred == target {
                correct += 1;
            }
        }
        let acc = correct as f64 / y.len() as f64;
        assert!(acc > 0.99, "memorization accuracy {acc}");
    }

    #[test]
    fn convlstm_trains_and_predicts() {
        let cfg_model = crate::nn::convlstm::ConvLstmConfig {
            filters: 8,
            lstm_units: 12,
            unroll: 8,
            ..Default::default()
        };
        let rec = make_record(120, 60);
        let stats = fit_channel_stats(&[&rec], Mode::IdSensor, &[1, 2, 3]);
        let seqs = vec![seq_windows(&rec, Mode::IdSensor, &[1, 2, 3], &stats, 20, 2)];
        let mut model = ConvLstmModel::new(cfg_model, 0).unwrap();
        let cfg = TrainConfig {
            max_epochs: 30,
            patience: 30,
            val_fraction: 0.0,
            minibatch: 16,
            ..TrainConfig::default()
        };
        let curve = train_convlstm(&mut model, &seqs, &cfg).unwrap();
        assert!(curve.last().unwrap().train_loss < curve[0].train_loss);
        let classes = convlstm_predict(&mut model, &seqs[0]).unwrap();
        assert_eq!(classes.len(), seqs[0].n);
        let correct =
            classes.iter().zip(&seqs[0].labels).filter(|(p, y)| *p == *y).count();
        assert!(correct as f64 / classes.len() as f64 > 0.8);
    }
}
