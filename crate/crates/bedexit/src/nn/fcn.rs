//! Dense-labeling fully convolutional network.
//!
//! Five same-padded conv/max-pool blocks with stride 1 keep the time length
//! unchanged, so a window of W readings yields W per-reading class scores;
//! a 1x1 convolution maps to the two classes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ops::{ActKind, Activation, Conv1d, Dropout, MaxPool1d, Padding};
use super::tensor::{Param, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcnConfig {
    /// Readings per window.
    pub window: usize,
    /// Input channels per reading.
    pub in_channels: usize,
    /// Filters in every conv block.
    pub width: usize,
    /// Number of conv/pool blocks.
    pub conv_layers: usize,
    pub kernel: usize,
    pub pool: usize,
    pub dropout: f64,
    pub leaky_slope: f64,
    pub classes: usize,
}

impl Default for FcnConfig {
    fn default() -> Self {
        FcnConfig {
            window: 10,
            in_channels: 4,
            width: 32,
            conv_layers: 5,
            kernel: 3,
            pool: 3,
            dropout: 0.5,
            leaky_slope: 0.01,
            classes: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FcnModel {
    pub cfg: FcnConfig,
    blocks: Vec<(Conv1d, Activation, MaxPool1d)>,
    dropout: Dropout,
    head: Conv1d,
}

impl FcnModel {
    pub fn new(cfg: FcnConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut blocks = Vec::with_capacity(cfg.conv_layers);
        let mut in_ch = cfg.in_channels;
        for _ in 0..cfg.conv_layers {
            let conv = Conv1d::new(in_ch, cfg.width, cfg.kernel, 1, Padding::Same, &mut rng);
            blocks.push((
                conv,
                Activation::new(ActKind::LeakyRelu(cfg.leaky_slope)),
                MaxPool1d::new(cfg.pool),
            ));
            in_ch = cfg.width;
        }
        let head = Conv1d::new(in_ch, cfg.classes, 1, 1, Padding::Valid, &mut rng);
        let dropout = Dropout::new(cfg.dropout);
        FcnModel { cfg, blocks, dropout, head }
    }

    /// x: [B, in_channels, window] -> logits [B, classes, window].
    pub fn forward(&mut self, x: &Tensor, train: bool, rng: &mut ChaCha8Rng) -> Result<Tensor> {
        if x.shape.len() != 3 || x.shape[1] != self.cfg.in_channels || x.shape[2] != self.cfg.window
        {
            return Err(Error::Shape(format!(
                "expected [B, {}, {}], got {:?}",
                self.cfg.in_channels, self.cfg.window, x.shape
            )));
        }
        let mut h = x.clone();
        for (conv, act, pool) in &mut self.blocks {
            h = conv.forward(&h);
            h = act.forward(&h);
            h = pool.forward(&h);
        }
        h = self.dropout.forward(&h, train, rng);
        Ok(self.head.forward(&h))
    }

    /// gout: [B, classes, window]; accumulates parameter gradients.
    pub fn backward(&mut self, gout: &Tensor) {
        let mut g = self.head.backward(gout);
        g = self.dropout.backward(&g);
        for (conv, act, pool) in self.blocks.iter_mut().rev() {
            g = pool.backward(&g);
            g = act.backward(&g);
            g = conv.backward(&g);
        }
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Parameters in a fixed documented order: conv blocks first (w then b),
    /// then the 1x1 head.
    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = Vec::new();
        for (conv, _, _) in &mut self.blocks {
            out.push(&mut conv.w);
            out.push(&mut conv.b);
        }
        out.push(&mut self.head.w);
        out.push(&mut self.head.b);
        out
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 0..self.blocks.len() {
            names.push(format!("conv{i}.w"));
            names.push(format!("conv{i}.b"));
        }
        names.push("head.w".into());
        names.push("head.b".into());
        names
    }
}
