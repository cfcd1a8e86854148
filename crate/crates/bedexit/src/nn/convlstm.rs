//! Convolutional-recurrent classifier.
//!
//! Each window of readings runs through a stack of strided valid
//! convolutions that collapses the time axis to a single step (20 -> 9 -> 4
//! -> 1 with kernel 3, stride 2), producing one filter vector per window.
//! An LSTM consumes the window vectors in chronological order; state carries
//! across chunks within one patient and must be reset between patients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lstm::{Lstm, LstmState};
use super::ops::{ActKind, Activation, Conv1d, Dense, Dropout, Padding};
use super::tensor::{Param, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvLstmConfig {
    /// Readings per window.
    pub window: usize,
    pub in_channels: usize,
    /// Filters in every conv layer.
    pub filters: usize,
    pub conv_layers: usize,
    pub kernel: usize,
    pub stride: usize,
    pub lstm_units: usize,
    pub dropout: f64,
    /// Truncated-backpropagation chunk length in windows.
    pub unroll: usize,
    pub classes: usize,
}

impl Default for ConvLstmConfig {
    fn default() -> Self {
        ConvLstmConfig {
            window: 20,
            in_channels: 4,
            filters: 40,
            conv_layers: 3,
            kernel: 3,
            stride: 2,
            lstm_units: 160,
            dropout: 0.5,
            unroll: 40,
            classes: 2,
        }
    }
}

impl ConvLstmConfig {
    /// Length after each valid convolution; must collapse to exactly 1.
    pub fn conv_out_len(&self) -> Result<usize> {
        let mut l = self.window;
        for _ in 0..self.conv_layers {
            if l < self.kernel {
                return Err(Error::Config(format!(
                    "conv stack underflows: length {l} < kernel {}",
                    self.kernel
                )));
            }
            l = (l - self.kernel) / self.stride + 1;
        }
        if l != 1 {
            return Err(Error::Config(format!(
                "conv stack must collapse the window to one step, got length {l}"
            )));
        }
        Ok(l)
    }
}

#[derive(Debug, Clone)]
pub struct ConvLstmModel {
    pub cfg: ConvLstmConfig,
    convs: Vec<(Conv1d, Activation)>,
    lstm: Lstm,
    dropout: Dropout,
    head: Dense,
    chunk_shape: [usize; 2],
}

impl ConvLstmModel {
    pub fn new(cfg: ConvLstmConfig, seed: u64) -> Result<Self> {
        cfg.conv_out_len()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut convs = Vec::with_capacity(cfg.conv_layers);
        let mut in_ch = cfg.in_channels;
        for _ in 0..cfg.conv_layers {
            let conv =
                Conv1d::new(in_ch, cfg.filters, cfg.kernel, cfg.stride, Padding::Valid, &mut rng);
            convs.push((conv, Activation::new(ActKind::Elu(1.0))));
            in_ch = cfg.filters;
        }
        let lstm = Lstm::new(cfg.filters, cfg.lstm_units, &mut rng);
        let head = Dense::new(cfg.lstm_units, cfg.classes, &mut rng);
        let dropout = Dropout::new(cfg.dropout);
        Ok(ConvLstmModel { cfg, convs, lstm, dropout, head, chunk_shape: [0, 0] })
    }

    pub fn fresh_state(&self, lanes: usize) -> LstmState {
        LstmState::zeros(lanes, self.cfg.lstm_units)
    }

    /// Window vectors produced by the conv stack: [B*T, 4, W] -> [B*T, F].
    fn conv_features(&mut self, x: &Tensor) -> Tensor {
        let mut h = x.clone();
        for (conv, act) in &mut self.convs {
            h = conv.forward(&h);
            h = act.forward(&h);
        }
        // [N, F, 1] -> [N, F]
        Tensor::from_vec(&[h.shape[0], h.shape[1]], h.data)
    }

    /// One chunk of chronological windows.
    ///
    /// x: [B, T, in_channels, window]; `state` holds per-lane LSTM state and
    /// advances. Returns logits [B, T, classes].
    pub fn forward_chunk(
        &mut self,
        x: &Tensor,
        state: &mut LstmState,
        train: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Tensor> {
        if x.shape.len() != 4
            || x.shape[2] != self.cfg.in_channels
            || x.shape[3] != self.cfg.window
        {
            return Err(Error::Shape(format!(
                "expected [B, T, {}, {}], got {:?}",
                self.cfg.in_channels, self.cfg.window, x.shape
            )));
        }
        let (bsz, steps) = (x.shape[0], x.shape[1]);
        self.chunk_shape = [bsz, steps];
        let flat = Tensor::from_vec(
            &[bsz * steps, self.cfg.in_channels, self.cfg.window],
            x.data.clone(),
        );
        let feats = self.conv_features(&flat);
        let seq = Tensor::from_vec(&[bsz, steps, self.cfg.filters], feats.data);
        let hidden = self.lstm.forward(&seq, state);
        let dropped = self.dropout.forward(&hidden, train, rng);
        let logits = self.head.forward(&dropped);
        Ok(logits)
    }

    /// gout: [B, T, classes]; accumulates parameter gradients.
    pub fn backward(&mut self, gout: &Tensor) {
        let [bsz, steps] = self.chunk_shape;
        let mut g = self.head.backward(gout);
        g = self.dropout.backward(&g);
        g = self.lstm.backward(&g);
        // [B, T, F] -> [B*T, F, 1]
        let mut g = Tensor::from_vec(&[bsz * steps, self.cfg.filters, 1], g.data);
        for (conv, act) in self.convs.iter_mut().rev() {
            g = act.backward(&g);
            g = conv.backward(&g);
        }
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Fixed documented order: conv layers (w, b), LSTM (w_ih, w_hh, b),
    /// head (w, b).
    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = Vec::new();
        for (conv, _) in &mut self.convs {
            out.push(&mut conv.w);
            out.push(&mut conv.b);
        }
        out.push(&mut self.lstm.w_ih);
        out.push(&mut self.lstm.w_hh);
        out.push(&mut self.lstm.b);
        out.push(&mut self.head.w);
        out.push(&mut self.head.b);
        out
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 0..self.convs.len() {
            names.push(format!("conv{i}.w"));
            names.push(format!("conv{i}.b"));
        }
        names.push("lstm.w_ih".into());
        names.push("lstm.w_hh".into());
        names.push("lstm.b".into());
        names.push("head.w".into());
        names.push("head.b".into());
        names
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn conv_stack_collapses_window_to_one_step() {
        let cfg = ConvLstmConfig::default();
        assert_eq!(cfg.conv_out_len().unwrap(), 1);

        let mut model = ConvLstmModel::new(cfg.clone(), 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::from_vec(
            &[2, cfg.in_channels, cfg.window],
            (0..2 * cfg.in_channels * cfg.window).map(|_| rng.random::<f64>()).collect(),
        );
        let feats = model.conv_features(&x);
        assert_eq!(feats.shape, vec![2, 40]);
    }

    #[test]
    fn bad_geometry_is_a_config_error() {
        let cfg = ConvLstmConfig { window: 23, ..ConvLstmConfig::default() };
        assert!(ConvLstmModel::new(cfg, 0).is_err());
    }

    #[test]
    fn state_reset_reproduces_identical_outputs() {
        let cfg = ConvLstmConfig {
            window: 20,
            filters: 8,
            lstm_units: 12,
            unroll: 4,
            ..ConvLstmConfig::default()
        };
        let mut model = ConvLstmModel::new(cfg.clone(), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Tensor::from_vec(
            &[1, 4, 4, 20],
            (0..4 * 4 * 20).map(|_| rng.random::<f64>()).collect(),
        );
        let mut state = model.fresh_state(1);
        let mut r1 = ChaCha8Rng::seed_from_u64(0);
        let y1 = model.forward_chunk(&x, &mut state, false, &mut r1).unwrap();
        let mut state2 = model.fresh_state(1);
        let mut r2 = ChaCha8Rng::seed_from_u64(0);
        let y2 = model.forward_chunk(&x, &mut state2, false, &mut r2).unwrap();
        assert_eq!(y1.data, y2.data);
    }
}
