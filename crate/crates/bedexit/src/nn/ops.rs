//! The individual differentiable operations: 1-D convolution, max-pooling,
//! pointwise activations, a dense layer, dropout and softmax cross-entropy.
//!
//! Each layer caches what its backward pass needs; `backward` consumes the
//! most recent forward. Convolutions come in two flavours: zero same-padding
//! with stride 1 (length preserved) and valid (no padding), where
//! `L_out = (L_in - kernel) / stride + 1`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::{Param, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Zero padding, stride 1, output length equals input length.
    Same,
    /// No padding; output length (L - k)/stride + 1.
    Valid,
}

#[derive(Debug, Clone)]
pub struct Conv1d {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: Padding,
    pub w: Param,
    pub b: Param,
    cache_x: Tensor,
}

impl Conv1d {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        assert!(padding == Padding::Valid || stride == 1, "same padding requires stride 1");
        let bound = (6.0 / (in_ch * kernel + out_ch * kernel) as f64).sqrt();
        Conv1d {
            in_ch,
            out_ch,
            kernel,
            stride,
            padding,
            w: Param::uniform(&[out_ch, in_ch, kernel], bound, rng),
            b: Param::zeros(&[out_ch]),
            cache_x: Tensor::zeros(&[0]),
        }
    }

    pub fn out_len(&self, l_in: usize) -> usize {
        match self.padding {
            Padding::Same => l_in,
            Padding::Valid => (l_in - self.kernel) / self.stride + 1,
        }
    }

    fn pad_left(&self) -> isize {
        match self.padding {
            Padding::Same => ((self.kernel - 1) / 2) as isize,
            Padding::Valid => 0,
        }
    }

    /// x: [B, in_ch, L] -> [B, out_ch, out_len]
    pub fn forward(&mut self, x: &Tensor) -> Tensor {
        let (bsz, l_in) = (x.shape[0], x.shape[2]);
        assert_eq!(x.shape[1], self.in_ch, "channel mismatch");
        let l_out = self.out_len(l_in);
        let (ic, oc, k) = (self.in_ch, self.out_ch, self.kernel);
        let pad = self.pad_left();
        let mut out = vec![0.0; bsz * oc * l_out];
        for b in 0..bsz {
            let x_b = &x.data[b * ic * l_in..(b + 1) * ic * l_in];
            let y_b = &mut out[b * oc * l_out..(b + 1) * oc * l_out];
            for o in 0..oc {
                let w_o = &self.w.value[o * ic * k..(o + 1) * ic * k];
                let bias = self.b.value[o];
                for p in 0..l_out {
                    let start = (p * self.stride) as isize - pad;
                    let mut acc = bias;
                    for c in 0..ic {
                        let w_c = &w_o[c * k..c * k + k];
                        let x_c = &x_b[c * l_in..(c + 1) * l_in];
                        for (kk, &wv) in w_c.iter().enumerate() {
                            let ip = start + kk as isize;
                            if ip >= 0 && (ip as usize) < l_in {
                                acc += wv * x_c[ip as usize];
                            }
                        }
                    }
                    y_b[o * l_out + p] = acc;
                }
            }
        }
        self.cache_x = x.clone();
        Tensor::from_vec(&[bsz, oc, l_out], out)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, gout: &Tensor) -> Tensor {
        let x = &self.cache_x;
        let (bsz, l_in) = (x.shape[0], x.shape[2]);
        let l_out = gout.shape[2];
        let (ic, oc, k) = (self.in_ch, self.out_ch, self.kernel);
        let pad = self.pad_left();
        let mut gin = vec![0.0; x.data.len()];
        for b in 0..bsz {
            let x_b = &x.data[b * ic * l_in..(b + 1) * ic * l_in];
            let gin_b = &mut gin[b * ic * l_in..(b + 1) * ic * l_in];
            let g_b = &gout.data[b * oc * l_out..(b + 1) * oc * l_out];
            for o in 0..oc {
                let w_o = &self.w.value[o * ic * k..(o + 1) * ic * k];
                let gw_o = &mut self.w.grad[o * ic * k..(o + 1) * ic * k];
                for p in 0..l_out {
                    let g = g_b[o * l_out + p];
                    if g == 0.0 {
                        continue;
                    }
                    self.b.grad[o] += g;
                    let start = (p * self.stride) as isize - pad;
                    for c in 0..ic {
                        for kk in 0..k {
                            let ip = start + kk as isize;
                            if ip >= 0 && (ip as usize) < l_in {
                                let ix = c * l_in + ip as usize;
                                gw_o[c * k + kk] += g * x_b[ix];
                                gin_b[ix] += g * w_o[c * k + kk];
                            }
                        }
                    }
                }
            }
        }
        Tensor::from_vec(&x.shape, gin)
    }
}

/// Max pooling with stride 1 and same padding (window clipped at the edges),
/// so the output length equals the input length.
#[derive(Debug, Clone)]
pub struct MaxPool1d {
    pub size: usize,
    argmax: Vec<usize>,
    in_shape: Vec<usize>,
}

impl MaxPool1d {
    pub fn new(size: usize) -> Self {
        MaxPool1d { size, argmax: Vec::new(), in_shape: Vec::new() }
    }

    /// x: [B, C, L] -> [B, C, L]
    pub fn forward(&mut self, x: &Tensor) -> Tensor {
        let (bsz, ch, l) = (x.shape[0], x.shape[1], x.shape[2]);
        let left = (self.size - 1) / 2;
        let mut out = vec![0.0; x.data.len()];
        self.argmax.clear();
        self.argmax.resize(x.data.len(), 0);
        for bc in 0..bsz * ch {
            let x_s = &x.data[bc * l..(bc + 1) * l];
            for p in 0..l {
                let lo = p.saturating_sub(left);
                let hi = (p + self.size - left).min(l);
                let mut best = lo;
                for i in lo + 1..hi {
                    if x_s[i] > x_s[best] {
                        best = i;
                    }
                }
                out[bc * l + p] = x_s[best];
                self.argmax[bc * l + p] = best;
            }
        }
        self.in_shape = x.shape.clone();
        Tensor::from_vec(&x.shape, out)
    }

    pub fn backward(&mut self, gout: &Tensor) -> Tensor {
        let l = self.in_shape[2];
        let mut gin = vec![0.0; gout.data.len()];
        for bc in 0..self.in_shape[0] * self.in_shape[1] {
            for p in 0..l {
                gin[bc * l + self.argmax[bc * l + p]] += gout.data[bc * l + p];
            }
        }
        Tensor::from_vec(&self.in_shape, gin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActKind {
    /// max(x, slope * x)
    LeakyRelu(f64),
    /// x for x > 0, alpha * (e^x - 1) otherwise
    Elu(f64),
}

#[derive(Debug, Clone)]
pub struct Activation {
    pub kind: ActKind,
    cache_x: Vec<f64>,
    shape: Vec<usize>,
}

impl Activation {
    pub fn new(kind: ActKind) -> Self {
        Activation { kind, cache_x: Vec::new(), shape: Vec::new() }
    }

    pub fn forward(&mut self, x: &Tensor) -> Tensor {
        self.cache_x = x.data.clone();
        self.shape = x.shape.clone();
        let data = x
            .data
            .iter()
            .map(|&v| match self.kind {
                ActKind::LeakyRelu(s) => {
                    if v > 0.0 {
                        v
                    } else {
                        s * v
                    }
                }
                ActKind::Elu(a) => {
                    if v > 0.0 {
                        v
                    } else {
                        a * (v.exp() - 1.0)
                    }
                }
            })
            .collect();
        Tensor::from_vec(&x.shape, data)
    }

    pub fn backward(&mut self, gout: &Tensor) -> Tensor {
        let data = gout
            .data
            .iter()
            .zip(&self.cache_x)
            .map(|(&g, &v)| match self.kind {
                ActKind::LeakyRelu(s) => {
                    if v > 0.0 {
                        g
                    } else {
                        g * s
                    }
                }
                ActKind::Elu(a) => {
                    if v > 0.0 {
                        g
                    } else {
                        g * a * v.exp()
                    }
                }
            })
            .collect();
        Tensor::from_vec(&self.shape, data)
    }
}

/// Fully connected layer over the last dimension: [N, in] -> [N, out].
#[derive(Debug, Clone)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Param,
    pub b: Param,
    cache_x: Tensor,
}

impl Dense {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        Dense {
            in_dim,
            out_dim,
            w: Param::uniform(&[out_dim, in_dim], bound, rng),
            b: Param::zeros(&[out_dim]),
            cache_x: Tensor::zeros(&[0]),
        }
    }

    pub fn forward(&mut self, x: &Tensor) -> Tensor {
        let n = x.data.len() / self.in_dim;
        let mut out = vec![0.0; n * self.out_dim];
        for i in 0..n {
            let x_i = &x.data[i * self.in_dim..(i + 1) * self.in_dim];
            for o in 0..self.out_dim {
                let w_o = &self.w.value[o * self.in_dim..(o + 1) * self.in_dim];
                let acc: f64 = w_o.iter().zip(x_i).map(|(w, x)| w * x).sum();
                out[i * self.out_dim + o] = acc + self.b.value[o];
            }
        }
        self.cache_x = x.clone();
        let mut shape = x.shape.clone();
        *shape.last_mut().unwrap() = self.out_dim;
        Tensor::from_vec(&shape, out)
    }

    pub fn backward(&mut self, gout: &Tensor) -> Tensor {
        let x = &self.cache_x;
        let n = x.data.len() / self.in_dim;
        let mut gin = vec![0.0; x.data.len()];
        for i in 0..n {
            let x_i = &x.data[i * self.in_dim..(i + 1) * self.in_dim];
            let gin_i = &mut gin[i * self.in_dim..(i + 1) * self.in_dim];
            for o in 0..self.out_dim {
                let g = gout.data[i * self.out_dim + o];
                if g == 0.0 {
                    continue;
                }
                self.b.grad[o] += g;
                let w_o = &self.w.value[o * self.in_dim..(o + 1) * self.in_dim];
                let gw_o = &mut self.w.grad[o * self.in_dim..(o + 1) * self.in_dim];
                for j in 0..self.in_dim {
                    gw_o[j] += g * x_i[j];
                    gin_i[j] += g * w_o[j];
                }
            }
        }
        Tensor::from_vec(&x.shape, gin)
    }
}

/// Inverted dropout: active only in training mode with a seeded mask;
/// identity at inference.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub rate: f64,
    mask: Vec<f64>,
}

impl Dropout {
    pub fn new(rate: f64) -> Self {
        assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
        Dropout { rate, mask: Vec::new() }
    }

    pub fn forward(&mut self, x: &Tensor, train: bool, rng: &mut ChaCha8Rng) -> Tensor {
        if !train || self.rate == 0.0 {
            self.mask.clear();
            return x.clone();
        }
        let keep = 1.0 - self.rate;
        self.mask = x
            .data
            .iter()
            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let data = x.data.iter().zip(&self.mask).map(|(v, m)| v * m).collect();
        Tensor::from_vec(&x.shape, data)
    }

    pub fn backward(&mut self, gout: &Tensor) -> Tensor {
        if self.mask.is_empty() {
            return gout.clone();
        }
        let data = gout.data.iter().zip(&self.mask).map(|(g, m)| g * m).collect();
        Tensor::from_vec(&gout.shape, data)
    }
}

/// Row-wise softmax of logits [N, C].
pub fn softmax(logits: &Tensor) -> Tensor {
    let c = *logits.shape.last().unwrap();
    let n = logits.data.len() / c;
    let mut out = vec![0.0; logits.data.len()];
    for i in 0..n {
        let row = &logits.data[i * c..(i + 1) * c];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (j, &v) in row.iter().enumerate() {
            let e = (v - m).exp();
            out[i * c + j] = e;
            z += e;
        }
        for j in 0..c {
            out[i * c + j] /= z;
        }
    }
    Tensor::from_vec(&logits.shape, out)
}

/// Class-weighted softmax cross-entropy over rows of [N, C].
///
/// loss = sum_i w[y_i] * (-log p_i[y_i]) / sum_i w[y_i], and the returned
/// gradient is d loss / d logits.
pub fn softmax_cross_entropy(
    logits: &Tensor,
    targets: &[usize],
    class_weights: &[f64],
) -> Result<(f64, Tensor)> {
    let c = *logits.shape.last().unwrap();
    let n = logits.data.len() / c;
    if targets.len() != n {
        return Err(Error::Shape(format!(
            "{} logits rows vs {} targets",
            n,
            targets.len()
        )));
    }
    let probs = softmax(logits);
    let weight_sum: f64 = targets.iter().map(|&y| class_weights[y]).sum();
    let mut loss = 0.0;
    let mut grad = vec![0.0; logits.data.len()];
    for (i, &y) in targets.iter().enumerate() {
        let w = class_weights[y] / weight_sum;
        let p = probs.data[i * c + y].max(1e-300);
        loss -= w * p.ln();
        for j in 0..c {
            let indicator = if j == y { 1.0 } else { 0.0 };
            grad[i * c + j] = w * (probs.data[i * c + j] - indicator);
        }
    }
    Ok((loss, Tensor::from_vec(&logits.shape, grad)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(42)
    }

    #[test]
    fn identity_kernel_preserves_input() {
        // Kernel [0, 1, 0] with same padding and stride 1 is the identity.
        let mut conv = Conv1d::new(1, 1, 3, 1, Padding::Same, &mut rng());
        conv.w.value = vec![0.0, 1.0, 0.0];
        conv.b.value = vec![0.0];
        let x = Tensor::from_vec(&[1, 1, 7], vec![3.0, -1.0, 4.0, -1.5, 9.0, 2.0, -6.0]);
        let y = conv.forward(&x);
        assert_eq!(y.data, x.data);
    }

    #[test]
    fn valid_conv_length_formula() {
        // L_out = floor((L_in - 3) / 2) + 1 maps 20 -> 9 -> 4 -> 1.
        let mut r = rng();
        let conv = Conv1d::new(1, 1, 3, 2, Padding::Valid, &mut r);
        assert_eq!(conv.out_len(20), 9);
        assert_eq!(conv.out_len(9), 4);
        assert_eq!(conv.out_len(4), 1);
    }

    #[test]
    fn softmax_rows_are_distributions() {
        let logits = Tensor::from_vec(&[3, 2], vec![0.3, -0.7, 10.0, -10.0, 0.0, 0.0]);
        let p = softmax(&logits);
        for i in 0..3 {
            let s = p.data[i * 2] + p.data[i * 2 + 1];
            assert!((s - 1.0).abs() < 1e-9);
            assert!(p.data[i * 2] >= 0.0 && p.data[i * 2 + 1] >= 0.0);
        }
    }

    #[test]
    fn dropout_is_identity_at_inference() {
        let mut d = Dropout::new(0.5);
        let x = Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let y = d.forward(&x, false, &mut rng());
        assert_eq!(y.data, x.data);
    }

    #[test]
    fn dropout_mask_is_seeded() {
        let mut d = Dropout::new(0.5);
        let x = Tensor::from_vec(&[1, 8], vec![1.0; 8]);
        let a = d.forward(&x, true, &mut rng()).data;
        let b = d.forward(&x, true, &mut rng()).data;
        assert_eq!(a, b);
    }

    #[test]
    fn maxpool_same_length() {
        let mut pool = MaxPool1d::new(3);
        let x = Tensor::from_vec(&[1, 1, 5], vec![1.0, 5.0, 2.0, 4.0, 3.0]);
        let y = pool.forward(&x);
        assert_eq!(y.shape, vec![1, 1, 5]);
        assert_eq!(y.data, vec![5.0, 5.0, 5.0, 4.0, 4.0]);
    }
}
