//! A single LSTM layer with explicit state, batched over independent lanes.
//!
//! `forward` runs one chunk of time steps and carries the state out, so
//! training can truncate backpropagation at chunk boundaries while inference
//! streams indefinitely. `backward` unrolls exactly the cached chunk; the
//! gradient flowing past its first step is dropped (truncation).

use rand_chacha::ChaCha8Rng;

use super::tensor::{Param, Tensor};

/// Per-lane hidden and cell state, shape [batch, hidden] each.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub batch: usize,
    pub hidden: usize,
}

impl LstmState {
    pub fn zeros(batch: usize, hidden: usize) -> Self {
        LstmState { h: vec![0.0; batch * hidden], c: vec![0.0; batch * hidden], batch, hidden }
    }

    pub fn reset_lane(&mut self, lane: usize) {
        for v in &mut self.h[lane * self.hidden..(lane + 1) * self.hidden] {
            *v = 0.0;
        }
        for v in &mut self.c[lane * self.hidden..(lane + 1) * self.hidden] {
            *v = 0.0;
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Gate order inside the packed weight matrices: input, forget, cell, output.
#[derive(Debug, Clone)]
pub struct Lstm {
    pub input_size: usize,
    pub hidden: usize,
    pub w_ih: Param, // [4H, I]
    pub w_hh: Param, // [4H, H]
    pub b: Param,    // [4H]
    cache: Cache,
}

#[derive(Debug, Clone, Default)]
struct Cache {
    batch: usize,
    steps: usize,
    xs: Vec<f64>,      // [T, B, I]
    h_prev: Vec<f64>,  // [T+1, B, H]; row 0 is the incoming state
    c_prev: Vec<f64>,  // [T+1, B, H]
    gates: Vec<f64>,   // [T, B, 4H] post-activation
    tanh_c: Vec<f64>,  // [T, B, H]
}

impl Lstm {
    pub fn new(input_size: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (1.0 / hidden as f64).sqrt();
        let mut b = Param::zeros(&[4 * hidden]);
        // Forget-gate bias starts at 1 so early training does not flush the
        // cell state.
        for v in &mut b.value[hidden..2 * hidden] {
            *v = 1.0;
        }
        Lstm {
            input_size,
            hidden,
            w_ih: Param::uniform(&[4 * hidden, input_size], bound, rng),
            w_hh: Param::uniform(&[4 * hidden, hidden], bound, rng),
            b,
            cache: Cache::default(),
        }
    }

    /// x: [B, T, I]; returns hidden sequence [B, T, H] and advances `state`.
    pub fn forward(&mut self, x: &Tensor, state: &mut LstmState) -> Tensor {
        let (bsz, steps) = (x.shape[0], x.shape[1]);
        assert_eq!(x.shape[2], self.input_size, "lstm input size mismatch");
        assert_eq!(state.batch, bsz, "state batch mismatch");
        let (h_dim, i_dim) = (self.hidden, self.input_size);
        let g4 = 4 * h_dim;

        let mut cache = Cache {
            batch: bsz,
            steps,
            xs: vec![0.0; steps * bsz * i_dim],
            h_prev: vec![0.0; (steps + 1) * bsz * h_dim],
            c_prev: vec![0.0; (steps + 1) * bsz * h_dim],
            gates: vec![0.0; steps * bsz * g4],
            tanh_c: vec![0.0; steps * bsz * h_dim],
        };
        cache.h_prev[..bsz * h_dim].copy_from_slice(&state.h);
        cache.c_prev[..bsz * h_dim].copy_from_slice(&state.c);

        let mut out = vec![0.0; bsz * steps * h_dim];
        let mut h_in = vec![0.0; h_dim];
        let mut c_in = vec![0.0; h_dim];
        let mut z = vec![0.0; g4];
        for t in 0..steps {
            for lane in 0..bsz {
                let x_t = &x.data[(lane * steps + t) * i_dim..(lane * steps + t + 1) * i_dim];
                cache.xs[(t * bsz + lane) * i_dim..(t * bsz + lane + 1) * i_dim]
                    .copy_from_slice(x_t);
                let h_in_off = (t * bsz + lane) * h_dim;
                h_in.copy_from_slice(&cache.h_prev[h_in_off..h_in_off + h_dim]);
                c_in.copy_from_slice(&cache.c_prev[h_in_off..h_in_off + h_dim]);

                for (g, zg) in z.iter_mut().enumerate() {
                    let w_row = &self.w_ih.value[g * i_dim..(g + 1) * i_dim];
                    let u_row = &self.w_hh.value[g * h_dim..(g + 1) * h_dim];
                    let mut acc = self.b.value[g];
                    for (w, xv) in w_row.iter().zip(x_t) {
                        acc += w * xv;
                    }
                    for (u, hv) in u_row.iter().zip(&h_in) {
                        acc += u * hv;
                    }
                    *zg = acc;
                }

                let gate_off = (t * bsz + lane) * g4;
                let out_off = (t + 1) * bsz * h_dim + lane * h_dim;
                for j in 0..h_dim {
                    let i_g = sigmoid(z[j]);
                    let f_g = sigmoid(z[h_dim + j]);
                    let g_g = z[2 * h_dim + j].tanh();
                    let o_g = sigmoid(z[3 * h_dim + j]);
                    let c_new = f_g * c_in[j] + i_g * g_g;
                    let tc = c_new.tanh();
                    let h_new = o_g * tc;

                    cache.gates[gate_off + j] = i_g;
                    cache.gates[gate_off + h_dim + j] = f_g;
                    cache.gates[gate_off + 2 * h_dim + j] = g_g;
                    cache.gates[gate_off + 3 * h_dim + j] = o_g;
                    cache.tanh_c[(t * bsz + lane) * h_dim + j] = tc;
                    cache.c_prev[out_off + j] = c_new;
                    cache.h_prev[out_off + j] = h_new;
                    out[(lane * steps + t) * h_dim + j] = h_new;
                }
            }
        }
        let last = steps * bsz * h_dim;
        state.h.copy_from_slice(&cache.h_prev[last..last + bsz * h_dim]);
        state.c.copy_from_slice(&cache.c_prev[last..last + bsz * h_dim]);
        self.cache = cache;
        Tensor::from_vec(&[bsz, steps, h_dim], out)
    }

    /// gout: [B, T, H]; accumulates parameter gradients and returns dx.
    pub fn backward(&mut self, gout: &Tensor) -> Tensor {
        let cache = &self.cache;
        let (bsz, steps) = (cache.batch, cache.steps);
        let (h_dim, i_dim) = (self.hidden, self.input_size);
        let g4 = 4 * h_dim;

        let mut gin = vec![0.0; bsz * steps * i_dim];
        let mut dh_next = vec![0.0; bsz * h_dim];
        let mut dc_next = vec![0.0; bsz * h_dim];

        for t in (0..steps).rev() {
            for lane in 0..bsz {
                let gate_off = (t * bsz + lane) * g4;
                let hc_off = (t * bsz + lane) * h_dim;
                let x_t = &cache.xs[(t * bsz + lane) * i_dim..(t * bsz + lane + 1) * i_dim];
                let h_in = &cache.h_prev[hc_off..hc_off + h_dim];
                let c_in = &cache.c_prev[hc_off..hc_off + h_dim];

                let mut dz = vec![0.0; g4];
                for j in 0..h_dim {
                    let dh = gout.data[(lane * steps + t) * h_dim + j]
                        + dh_next[lane * h_dim + j];
                    let i_g = cache.gates[gate_off + j];
                    let f_g = cache.gates[gate_off + h_dim + j];
                    let g_g = cache.gates[gate_off + 2 * h_dim + j];
                    let o_g = cache.gates[gate_off + 3 * h_dim + j];
                    let tc = cache.tanh_c[hc_off + j];

                    let mut dc = dc_next[lane * h_dim + j] + dh * o_g * (1.0 - tc * tc);
                    let d_o = dh * tc;
                    let d_i = dc * g_g;
                    let d_f = dc * c_in[j];
                    let d_g = dc * i_g;
                    dc *= f_g;
                    dc_next[lane * h_dim + j] = dc;

                    dz[j] = d_i * i_g * (1.0 - i_g);
                    dz[h_dim + j] = d_f * f_g * (1.0 - f_g);
                    dz[2 * h_dim + j] = d_g * (1.0 - g_g * g_g);
                    dz[3 * h_dim + j] = d_o * o_g * (1.0 - o_g);
                }

                let gx =
                    &mut gin[(lane * steps + t) * i_dim..(lane * steps + t + 1) * i_dim];
                let dh_prev = &mut dh_next[lane * h_dim..(lane + 1) * h_dim];
                dh_prev.iter_mut().for_each(|v| *v = 0.0);
                for g in 0..g4 {
                    let d = dz[g];
                    if d == 0.0 {
                        continue;
                    }
                    self.b.grad[g] += d;
                    let w_row = &self.w_ih.value[g * i_dim..(g + 1) * i_dim];
                    let gw_row = &mut self.w_ih.grad[g * i_dim..(g + 1) * i_dim];
                    for j in 0..i_dim {
                        gw_row[j] += d * x_t[j];
                        gx[j] += d * w_row[j];
                    }
                    let u_row = &self.w_hh.value[g * h_dim..(g + 1) * h_dim];
                    let gu_row = &mut self.w_hh.grad[g * h_dim..(g + 1) * h_dim];
                    for j in 0..h_dim {
                        gu_row[j] += d * h_in[j];
                        dh_prev[j] += d * u_row[j];
                    }
                }
            }
        }
        Tensor::from_vec(&[bsz, steps, i_dim], gin)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn stateless_rerun_is_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut lstm = Lstm::new(3, 5, &mut rng);
        let x = Tensor::from_vec(&[1, 4, 3], (0..12).map(|i| (i as f64 * 0.37).sin()).collect());
        let mut s1 = LstmState::zeros(1, 5);
        let y1 = lstm.forward(&x, &mut s1);
        let mut s2 = LstmState::zeros(1, 5);
        let y2 = lstm.forward(&x, &mut s2);
        assert_eq!(y1.data, y2.data);
        assert_eq!(s1, s2);
    }

    #[test]
    fn chunked_forward_equals_full_forward() {
        // Carrying state across two chunks must reproduce the single pass.
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut lstm = Lstm::new(2, 4, &mut rng);
        let data: Vec<f64> = (0..12).map(|i| (i as f64 * 0.71).cos()).collect();
        let x_full = Tensor::from_vec(&[1, 6, 2], data.clone());
        let mut s = LstmState::zeros(1, 4);
        let y_full = lstm.forward(&x_full, &mut s);

        let x_a = Tensor::from_vec(&[1, 3, 2], data[..6].to_vec());
        let x_b = Tensor::from_vec(&[1, 3, 2], data[6..].to_vec());
        let mut s2 = LstmState::zeros(1, 4);
        let y_a = lstm.forward(&x_a, &mut s2);
        let y_b = lstm.forward(&x_b, &mut s2);
        let mut joined = y_a.data.clone();
        joined.extend_from_slice(&y_b.data);
        for (a, b) in y_full.data.iter().zip(&joined) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(s.h, s2.h);
    }
}
