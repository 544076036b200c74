//! Q-network: LSTM feature extractor with an affine head, and its optimizers.

use super::lstm::{axpy, dot, LstmCache, LstmParams};
use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmQNet {
    pub lstm: LstmParams,
    /// `actions × hidden`, row-major.
    pub head_w: Vec<f64>,
    pub head_b: Vec<f64>,
}

/// Forward activations plus the Q-vector.
#[derive(Debug, Clone)]
pub struct QForward {
    pub cache: LstmCache,
    pub q: Vec<f64>,
}

impl LstmQNet {
    pub fn zeros(input_dim: usize, hidden_dim: usize, actions: usize) -> Self {
        Self {
            lstm: LstmParams::zeros(input_dim, hidden_dim),
            head_w: vec![0.0; actions * hidden_dim],
            head_b: vec![0.0; actions],
        }
    }

    /// Random weights scaled by `init_scale`; zero yields an all-zero network.
    pub fn random<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, actions: usize, init_scale: f64, rng: &mut R) -> Self {
        let lstm = LstmParams::random(input_dim, hidden_dim, init_scale, rng);
        let mut head_w = vec![0.0; actions * hidden_dim];
        if init_scale != 0.0 {
            let bound = init_scale / (hidden_dim as f64).sqrt();
            for w in &mut head_w {
                *w = rng.random_range(-bound..bound);
            }
        }
        Self { lstm, head_w, head_b: vec![0.0; actions] }
    }

    pub fn actions(&self) -> usize {
        self.head_b.len()
    }

    pub fn input_dim(&self) -> usize {
        self.lstm.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.lstm.hidden_dim
    }

    pub fn param_count(&self) -> usize {
        self.lstm.param_count() + self.head_w.len() + self.head_b.len()
    }

    pub fn is_finite(&self) -> bool {
        self.lstm.is_finite() && self.head_w.iter().chain(&self.head_b).all(|x| x.is_finite())
    }

    pub fn fill(&mut self, value: f64) {
        self.lstm.fill(value);
        self.head_w.fill(value);
        self.head_b.fill(value);
    }

    pub fn forward(&self, seq: &[f64]) -> Result<QForward> {
        if self.head_w.len() != self.actions() * self.hidden_dim() {
            return Err(Error::Contract("Q head shape does not match hidden size".into()));
        }
        let cache = self.lstm.forward(seq)?;
        let h = cache.final_hidden();
        let hd = self.hidden_dim();
        let q = (0..self.actions()).map(|a| self.head_b[a] + dot(&self.head_w[a * hd..(a + 1) * hd], h)).collect();
        Ok(QForward { cache, q })
    }

    pub fn q_values(&self, seq: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(seq)?.q)
    }

    /// Accumulates `∂L/∂θ` into `grads` given `∂L/∂q`.
    pub fn backward_into(&self, fwd: &QForward, dq: &[f64], grads: &mut LstmQNet) -> Result<()> {
        if dq.len() != self.actions() {
            return Err(Error::Contract(format!("expected {} Q gradients, got {}", self.actions(), dq.len())));
        }
        let hd = self.hidden_dim();
        let h = fwd.cache.final_hidden();
        let mut dh = vec![0.0; hd];
        for (a, &g) in dq.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grads.head_b[a] += g;
            axpy(g, h, &mut grads.head_w[a * hd..(a + 1) * hd]);
            axpy(g, &self.head_w[a * hd..(a + 1) * hd], &mut dh);
        }
        self.lstm.backward_into(&fwd.cache, &dh, &mut grads.lstm)
    }

    pub(crate) fn blocks(&self) -> [&[f64]; 5] {
        [&self.lstm.wx, &self.lstm.wh, &self.lstm.b, &self.head_w, &self.head_b]
    }

    pub(crate) fn blocks_mut(&mut self) -> [&mut [f64]; 5] {
        [&mut self.lstm.wx, &mut self.lstm.wh, &mut self.lstm.b, &mut self.head_w, &mut self.head_b]
    }

    pub fn grad_norm(&self) -> f64 {
        self.blocks().iter().flat_map(|b| b.iter()).map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for b in self.blocks_mut() {
            for x in b.iter_mut() {
                *x *= factor;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::config("optimizer", format!("expected sgd or adam, got {other:?}"))),
        }
    }
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        }
    }
}

/// Gradient-descent state for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, net: &LstmQNet) -> Self {
        let shapes = |n: &LstmQNet| n.blocks().iter().map(|b| vec![0.0; b.len()]).collect::<Vec<_>>();
        let (m, v) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam => (shapes(net), shapes(net)),
        };
        Self { kind, lr, t: 0, m, v }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn step(&mut self, net: &mut LstmQNet, grads: &LstmQNet) {
        self.t += 1;
        let lr = self.lr;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in net.blocks_mut().into_iter().zip(grads.blocks()) {
                    axpy(-lr, g, p);
                }
            }
            OptimizerKind::Adam => {
                let bc1 = 1.0 - ADAM_BETA1.powi(self.t.min(i32::MAX as u64) as i32);
                let bc2 = 1.0 - ADAM_BETA2.powi(self.t.min(i32::MAX as u64) as i32);
                let step = lr * bc2.sqrt() / bc1;
                for (k, (p, g)) in net.blocks_mut().into_iter().zip(grads.blocks()).enumerate() {
                    let (m, v) = (&mut self.m[k], &mut self.v[k]);
                    for i in 0..p.len() {
                        let gi = g[i];
                        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * gi;
                        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * gi * gi;
                        p[i] -= step * m[i] / (v[i].sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}
