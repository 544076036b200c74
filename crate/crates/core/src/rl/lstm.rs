//! Single-layer LSTM with full backpropagation through time.
//!
//! Gate blocks are stacked in the order input, forget, candidate, output:
//!
//! ```text
//! i = σ(W_i x + U_i h + b_i)    f = σ(W_f x + U_f h + b_f)
//! g = tanh(W_g x + U_g h + b_g) o = σ(W_o x + U_o h + b_o)
//! c' = f ⊙ c + i ⊙ g            h' = o ⊙ tanh(c')
//! ```
//!
//! Hidden and cell state start at zero for every sequence.

use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const GATES: usize = 4;

/// Recurrent weights; the same shape doubles as a gradient accumulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `4H × I`, row-major.
    pub wx: Vec<f64>,
    /// `4H × H`, row-major.
    pub wh: Vec<f64>,
    /// `4H`.
    pub b: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let rows = GATES * hidden_dim;
        Self {
            input_dim,
            hidden_dim,
            wx: vec![0.0; rows * input_dim],
            wh: vec![0.0; rows * hidden_dim],
            b: vec![0.0; rows],
        }
    }

    /// Uniform `±scale/√H` weights, zero biases except a unit forget bias.
    pub fn random<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, scale: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim);
        if scale == 0.0 {
            return p;
        }
        let bound = scale / (hidden_dim as f64).sqrt();
        for w in p.wx.iter_mut().chain(p.wh.iter_mut()) {
            *w = rng.random_range(-bound..bound);
        }
        for b in &mut p.b[hidden_dim..2 * hidden_dim] {
            *b = 1.0;
        }
        p
    }

    pub fn param_count(&self) -> usize {
        self.wx.len() + self.wh.len() + self.b.len()
    }

    pub fn fill(&mut self, value: f64) {
        self.wx.fill(value);
        self.wh.fill(value);
        self.b.fill(value);
    }

    pub fn is_finite(&self) -> bool {
        self.wx.iter().chain(&self.wh).chain(&self.b).all(|x| x.is_finite())
    }

    fn check_shape(&self) -> Result<()> {
        let rows = GATES * self.hidden_dim;
        if self.wx.len() != rows * self.input_dim || self.wh.len() != rows * self.hidden_dim || self.b.len() != rows {
            return Err(Error::Contract(format!(
                "LSTM parameter blocks do not match input_dim {} / hidden_dim {}",
                self.input_dim, self.hidden_dim
            )));
        }
        Ok(())
    }

    /// Runs the recurrence over `seq` (`steps × input_dim`, oldest first).
    pub fn forward(&self, seq: &[f64]) -> Result<LstmCache> {
        self.check_shape()?;
        let i_dim = self.input_dim;
        if i_dim == 0 || seq.len() % i_dim != 0 {
            return Err(Error::Contract(format!(
                "sequence length {} is not a multiple of input_dim {}",
                seq.len(),
                i_dim
            )));
        }
        let steps = seq.len() / i_dim;
        let h_dim = self.hidden_dim;
        let rows = GATES * h_dim;
        let mut cache = LstmCache {
            steps,
            input_dim: i_dim,
            hidden_dim: h_dim,
            x: seq.to_vec(),
            gates: vec![0.0; steps * rows],
            c: vec![0.0; (steps + 1) * h_dim],
            h: vec![0.0; (steps + 1) * h_dim],
            tanh_c: vec![0.0; steps * h_dim],
        };
        // Column-major copies turn each matvec into contiguous axpy updates.
        let wx_t = transpose(&self.wx, rows, i_dim);
        let wh_t = transpose(&self.wh, rows, h_dim);
        let mut z = vec![0.0; rows];
        for t in 0..steps {
            let x = &seq[t * i_dim..(t + 1) * i_dim];
            z.copy_from_slice(&self.b);
            for (k, &xk) in x.iter().enumerate() {
                axpy(xk, &wx_t[k * rows..(k + 1) * rows], &mut z);
            }
            let h_prev = &cache.h[t * h_dim..(t + 1) * h_dim];
            for (k, &hk) in h_prev.iter().enumerate() {
                if hk != 0.0 {
                    axpy(hk, &wh_t[k * rows..(k + 1) * rows], &mut z);
                }
            }
            let gates = &mut cache.gates[t * rows..(t + 1) * rows];
            for blk in 0..GATES {
                let (scale, numer, offset) = (ACT_SCALE[blk], ACT_NUMER[blk], ACT_OFFSET[blk]);
                let zs = &z[blk * h_dim..(blk + 1) * h_dim];
                for (g, &zi) in gates[blk * h_dim..(blk + 1) * h_dim].iter_mut().zip(zs) {
                    *g = offset + numer / (1.0 + exp(scale * zi));
                }
            }
            let (c_prev_all, c_next_all) = cache.c.split_at_mut((t + 1) * h_dim);
            let c_prev = &c_prev_all[t * h_dim..];
            let c_next = &mut c_next_all[..h_dim];
            let tanh_c = &mut cache.tanh_c[t * h_dim..(t + 1) * h_dim];
            let h_next = &mut cache.h[(t + 1) * h_dim..(t + 2) * h_dim];
            for j in 0..h_dim {
                c_next[j] = gates[h_dim + j] * c_prev[j] + gates[j] * gates[2 * h_dim + j];
            }
            for j in 0..h_dim {
                tanh_c[j] = tanh(c_next[j]);
            }
            for j in 0..h_dim {
                h_next[j] = gates[3 * h_dim + j] * tanh_c[j];
            }
        }
        Ok(cache)
    }

    /// Gradients of all blocks given `dL/dh` at the final step.
    pub fn backward(&self, cache: &LstmCache, d_hidden: &[f64]) -> Result<LstmParams> {
        let mut grads = LstmParams::zeros(self.input_dim, self.hidden_dim);
        self.backward_into(cache, d_hidden, &mut grads)?;
        Ok(grads)
    }

    /// Like [`backward`](Self::backward) but accumulates into `grads`.
    pub fn backward_into(&self, cache: &LstmCache, d_hidden: &[f64], grads: &mut LstmParams) -> Result<()> {
        let h_dim = self.hidden_dim;
        let i_dim = self.input_dim;
        if cache.hidden_dim != h_dim || cache.input_dim != i_dim || d_hidden.len() != h_dim {
            return Err(Error::Contract("LSTM backward called with mismatched cache or gradient".into()));
        }
        let rows = GATES * h_dim;
        let mut dh = d_hidden.to_vec();
        let mut dc = vec![0.0; h_dim];
        let mut dz = vec![0.0; rows];
        let mut dh_prev = vec![0.0; h_dim];
        for t in (0..cache.steps).rev() {
            let gates = &cache.gates[t * rows..(t + 1) * rows];
            let c_prev = &cache.c[t * h_dim..(t + 1) * h_dim];
            let tanh_c = &cache.tanh_c[t * h_dim..(t + 1) * h_dim];
            for j in 0..h_dim {
                let (gi, gf, gg, go) = (gates[j], gates[h_dim + j], gates[2 * h_dim + j], gates[3 * h_dim + j]);
                let d_o = dh[j] * tanh_c[j];
                let dcj = dc[j] + dh[j] * go * (1.0 - tanh_c[j] * tanh_c[j]);
                dz[j] = dcj * gg * gi * (1.0 - gi);
                dz[h_dim + j] = dcj * c_prev[j] * gf * (1.0 - gf);
                dz[2 * h_dim + j] = dcj * gi * (1.0 - gg * gg);
                dz[3 * h_dim + j] = d_o * go * (1.0 - go);
                dc[j] = dcj * gf;
            }
            let x = &cache.x[t * i_dim..(t + 1) * i_dim];
            let h_prev = &cache.h[t * h_dim..(t + 1) * h_dim];
            dh_prev.fill(0.0);
            for r in 0..rows {
                let g = dz[r];
                if g == 0.0 {
                    continue;
                }
                grads.b[r] += g;
                axpy(g, x, &mut grads.wx[r * i_dim..(r + 1) * i_dim]);
                axpy(g, h_prev, &mut grads.wh[r * h_dim..(r + 1) * h_dim]);
                axpy(g, &self.wh[r * h_dim..(r + 1) * h_dim], &mut dh_prev);
            }
            std::mem::swap(&mut dh, &mut dh_prev);
        }
        Ok(())
    }
}

/// Activations saved by [`LstmParams::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmCache {
    steps: usize,
    input_dim: usize,
    hidden_dim: usize,
    x: Vec<f64>,
    /// Post-activation gates, `steps × 4H`.
    gates: Vec<f64>,
    /// Cell states including the zero initial state, `(steps + 1) × H`.
    c: Vec<f64>,
    h: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmCache {
    pub fn final_hidden(&self) -> &[f64] {
        &self.h[self.steps * self.hidden_dim..]
    }

    pub fn final_cell(&self) -> &[f64] {
        &self.c[self.steps * self.hidden_dim..]
    }

    /// Post-activation gates at step `t`, in block order i, f, g, o.
    pub fn gates(&self, t: usize) -> &[f64] {
        let rows = GATES * self.hidden_dim;
        &self.gates[t * rows..(t + 1) * rows]
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// Final hidden state of the recurrence.
pub fn lstm_forward(seq: &[f64], params: &LstmParams) -> Result<Vec<f64>> {
    Ok(params.forward(seq)?.final_hidden().to_vec())
}

/// Full BPTT gradients for `dL/dh_T = output_gradient`.
pub fn lstm_backward(seq: &[f64], params: &LstmParams, output_gradient: &[f64]) -> Result<LstmParams> {
    let cache = params.forward(seq)?;
    params.backward(&cache, output_gradient)
}

fn transpose(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; m.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = m[r * cols + c];
        }
    }
    out
}

// Gate activations as `offset + numer / (1 + exp(scale·z))`: sigmoid for
// the i, f, o blocks and tanh for the candidate block.
const ACT_SCALE: [f64; GATES] = [-1.0, -1.0, 2.0, -1.0];
const ACT_NUMER: [f64; GATES] = [1.0, 1.0, -2.0, 1.0];
const ACT_OFFSET: [f64; GATES] = [0.0, 0.0, 1.0, 0.0];

/// Branch-free `exp`, accurate to a few ulp, that vectorizes.
///
/// Range reduction `x = k·ln2 + r` with `|r| ≤ ln2/2`, a degree-13 Taylor
/// polynomial in `r`, and `2^k` assembled directly in the exponent bits.
#[inline(always)]
pub(crate) fn exp(x: f64) -> f64 {
    const LOG2E: f64 = std::f64::consts::LOG2_E;
    const LN2_HI: f64 = 6.931_471_803_691_238_164_90e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
    // 1.5·2^52: adding it rounds to the nearest integer.
    const SHIFTER: f64 = 6_755_399_441_055_744.0;
    let x = x.clamp(-708.0, 708.0);
    let t = x * LOG2E + SHIFTER;
    let k = t - SHIFTER;
    let r = (x - k * LN2_HI) - k * LN2_LO;
    let mut p = 1.0 / 6_227_020_800.0;
    p = p * r + 1.0 / 479_001_600.0;
    p = p * r + 1.0 / 39_916_800.0;
    p = p * r + 1.0 / 3_628_800.0;
    p = p * r + 1.0 / 362_880.0;
    p = p * r + 1.0 / 40_320.0;
    p = p * r + 1.0 / 5_040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    let k_int = t.to_bits().wrapping_sub(SHIFTER.to_bits());
    p * f64::from_bits(k_int.wrapping_add(1023) << 52)
}

#[inline(always)]
pub(crate) fn tanh(x: f64) -> f64 {
    1.0 - 2.0 / (1.0 + exp(2.0 * x))
}

#[cfg(test)]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + exp(-x))
}

/// Dot product with four independent accumulators.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut tail = 0.0;
    for k in 4 * chunks..n {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    /// Straight-line reference written against per-gate nested matrices.
    fn naive_forward(seq: &[Vec<f64>], p: &LstmParams) -> Vec<f64> {
        let h_dim = p.hidden_dim;
        let i_dim = p.input_dim;
        let w = |g: usize, j: usize, k: usize| p.wx[(g * h_dim + j) * i_dim + k];
        let u = |g: usize, j: usize, k: usize| p.wh[(g * h_dim + j) * h_dim + k];
        let b = |g: usize, j: usize| p.b[g * h_dim + j];
        let mut h = vec![0.0; h_dim];
        let mut c = vec![0.0; h_dim];
        for x in seq {
            let mut pre = vec![vec![0.0; h_dim]; 4];
            for g in 0..4 {
                for j in 0..h_dim {
                    let mut s = b(g, j);
                    for k in 0..i_dim {
                        s += w(g, j, k) * x[k];
                    }
                    for k in 0..h_dim {
                        s += u(g, j, k) * h[k];
                    }
                    pre[g][j] = s;
                }
            }
            let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
            let mut h_new = vec![0.0; h_dim];
            for j in 0..h_dim {
                let i = sig(pre[0][j]);
                let f = sig(pre[1][j]);
                let gg = pre[2][j].tanh();
                let o = sig(pre[3][j]);
                c[j] = f * c[j] + i * gg;
                h_new[j] = o * c[j].tanh();
            }
            h = h_new;
        }
        h
    }

    #[test]
    fn fast_exp_matches_libm() {
        let mut rng = stream(9, Stream::Init);
        for _ in 0..100_000 {
            let x: f64 = rng.random_range(-700.0..700.0);
            let rel = (exp(x) - x.exp()).abs() / x.exp();
            assert!(rel < 1e-15, "x={x}: {rel}");
        }
        for x in [-1e-12, 0.0, 1e-12, 0.5, -0.5, 30.0] {
            assert!((tanh(x) - x.tanh()).abs() < 1e-15);
            assert!((sigmoid(x) - 1.0 / (1.0 + (-x).exp())).abs() < 1e-15);
        }
        assert_eq!(exp(-1e6), exp(-708.0));
        assert!(sigmoid(-1e6) >= 0.0 && sigmoid(1e6) == 1.0);
    }

    #[test]
    fn zero_inputs_and_biases_give_zero_state() {
        let mut rng = stream(1, Stream::Init);
        let mut p = LstmParams::random(5, 8, 1.0, &mut rng);
        p.b.fill(0.0);
        let h = lstm_forward(&vec![0.0; 5 * 66], &p).unwrap();
        assert!(h.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn gate_bounds_and_cell_growth() {
        let mut rng = stream(2, Stream::Init);
        let p = LstmParams::random(3, 6, 3.0, &mut rng);
        let seq: Vec<f64> = (0..3 * 20).map(|_| rng.random_range(-5.0..5.0)).collect();
        let cache = p.forward(&seq).unwrap();
        for t in 0..cache.steps() {
            let g = cache.gates(t);
            for j in 0..6 {
                for blk in [0, 1, 3] {
                    assert!(g[blk * 6 + j] > 0.0 && g[blk * 6 + j] < 1.0);
                }
                assert!(g[2 * 6 + j].abs() <= 1.0);
            }
        }
        assert!(cache.final_cell().iter().all(|c| c.abs() <= 20.0));
        assert!(cache.final_hidden().iter().all(|h| h.abs() < 1.0));
    }

    #[test]
    fn forward_matches_naive_reference() {
        let mut rng = stream(3, Stream::Init);
        for (i_dim, h_dim, steps) in [(1, 1, 1), (5, 8, 66), (3, 7, 13), (4, 32, 10)] {
            let p = LstmParams::random(i_dim, h_dim, 1.5, &mut rng);
            let seq: Vec<Vec<f64>> = (0..steps).map(|_| (0..i_dim).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            let flat: Vec<f64> = seq.iter().flatten().copied().collect();
            let fast = lstm_forward(&flat, &p).unwrap();
            let slow = naive_forward(&seq, &p);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_output_gradient_gives_zero_parameter_gradients() {
        let mut rng = stream(4, Stream::Init);
        let p = LstmParams::random(5, 8, 1.0, &mut rng);
        let seq: Vec<f64> = (0..5 * 12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = lstm_backward(&seq, &p, &[0.0; 8]).unwrap();
        assert!(g.wx.iter().chain(&g.wh).chain(&g.b).all(|x| *x == 0.0));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let p = LstmParams::zeros(5, 4);
        assert!(p.forward(&[0.0; 7]).is_err());
        let cache = p.forward(&[0.0; 10]).unwrap();
        assert!(p.backward(&cache, &[0.0; 3]).is_err());
        let mut bad = p.clone();
        bad.b.pop();
        assert!(bad.forward(&[0.0; 10]).is_err());
    }
}
