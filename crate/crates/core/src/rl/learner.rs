//! Deep Q-learning player: ε-greedy control over an [`LstmQNet`].

use super::qnet::{LstmQNet, Optimizer, OptimizerKind};
use super::replay::{Experience, ReplayMemory};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub hidden_dim: usize,
    /// Learning rate β.
    pub beta: f64,
    /// Discount γ.
    pub gamma: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub optimizer: OptimizerKind,
    /// Global gradient-norm clip; 0 disables.
    pub grad_clip: f64,
    /// Refresh period (updates) of a frozen target copy; 0 bootstraps from the live network.
    pub target_sync: usize,
    /// Stop bootstrapping at terminal (collision) states.
    pub terminal_cutoff: bool,
    /// Weight initialization scale; 0 gives an all-zero network.
    pub init_scale: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 32,
            beta: 1e-3,
            gamma: 0.95,
            batch_size: 1,
            replay_capacity: 10_000,
            optimizer: OptimizerKind::Adam,
            grad_clip: 10.0,
            target_sync: 0,
            terminal_cutoff: false,
            init_scale: 1.0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 {
            return Err(Error::config("hidden_dim", "must be positive"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::config("beta", format!("must be positive, got {}", self.beta)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("gamma", format!("must lie in [0, 1), got {}", self.gamma)));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        if self.replay_capacity == 0 {
            return Err(Error::config("replay_capacity", "must be positive"));
        }
        if !(self.grad_clip >= 0.0 && self.grad_clip.is_finite()) {
            return Err(Error::config("grad_clip", format!("must be nonnegative, got {}", self.grad_clip)));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::config("init_scale", format!("must be nonnegative, got {}", self.init_scale)));
        }
        Ok(())
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn greedy_action(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy choice. Always consumes one uniform draw, plus one index draw
/// when exploring.
pub fn select_action<R: Rng + ?Sized>(q: &[f64], eps: f64, rng: &mut R) -> usize {
    assert!(!q.is_empty(), "select_action needs at least one action");
    if rng.random::<f64>() < eps {
        rng.random_range(0..q.len())
    } else {
        greedy_action(q)
    }
}

/// `U`, or `U + γ·max Q(s′)` for experiences that bootstrap.
pub fn td_target(exp: &Experience, gamma: f64, net: &LstmQNet) -> Result<f64> {
    if exp.initial || exp.cutoff || gamma == 0.0 {
        return Ok(exp.utility);
    }
    let q = net.q_values(&exp.next_state)?;
    let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(exp.utility + gamma * best)
}

#[derive(Debug, Clone)]
pub struct QLearner {
    cfg: LearnerConfig,
    net: LstmQNet,
    target: Option<LstmQNet>,
    opt: Optimizer,
    memory: ReplayMemory,
    rng: SimRng,
    updates: u64,
}

impl QLearner {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, actions: usize, cfg: LearnerConfig, init_rng: &mut R, rng: SimRng) -> Result<Self> {
        cfg.validate()?;
        if input_dim == 0 || actions == 0 {
            return Err(Error::Contract("learner needs positive input and action dimensions".into()));
        }
        let net = LstmQNet::random(input_dim, cfg.hidden_dim, actions, cfg.init_scale, init_rng);
        Self::from_net(net, cfg, rng)
    }

    pub fn from_net(net: LstmQNet, cfg: LearnerConfig, rng: SimRng) -> Result<Self> {
        cfg.validate()?;
        if net.hidden_dim() != cfg.hidden_dim {
            return Err(Error::Contract(format!(
                "network hidden size {} differs from configured {}",
                net.hidden_dim(),
                cfg.hidden_dim
            )));
        }
        let opt = Optimizer::new(cfg.optimizer, cfg.beta, &net);
        let target = (cfg.target_sync > 0).then(|| net.clone());
        Ok(Self { cfg, net, target, opt, memory: ReplayMemory::new(cfg.replay_capacity), rng, updates: 0 })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    pub fn net(&self) -> &LstmQNet {
        &self.net
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        let q = self.net.q_values(state)?;
        if q.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite Q-value".into()));
        }
        Ok(q)
    }

    pub fn act(&mut self, state: &[f64], eps: f64) -> Result<usize> {
        let q = self.q_values(state)?;
        Ok(select_action(&q, eps, &mut self.rng))
    }

    pub fn remember(&mut self, exp: Experience) {
        self.memory.push(exp);
    }

    /// One gradient step on a uniformly sampled mini-batch.
    ///
    /// Returns `None` without touching any state when the memory is empty;
    /// otherwise the mean squared TD error measured before the update.
    pub fn train_step(&mut self) -> Result<Option<f64>> {
        if self.memory.is_empty() {
            return Ok(None);
        }
        let batch = self.cfg.batch_size;
        let mut grads = LstmQNet::zeros(self.net.input_dim(), self.net.hidden_dim(), self.net.actions());
        let mut loss = 0.0;
        for _ in 0..batch {
            let idx = self.memory.sample_index(&mut self.rng).expect("memory is nonempty");
            let exp = self.memory.get(idx).expect("sampled index is in range");
            let bootstrap = self.target.as_ref().unwrap_or(&self.net);
            let t = td_target(exp, self.cfg.gamma, bootstrap)?;
            let fwd = self.net.forward(&exp.state)?;
            let err = fwd.q[exp.action] - t;
            if !err.is_finite() {
                return Err(Error::Numerical(format!("non-finite TD error (target {t})")));
            }
            loss += err * err;
            let mut dq = vec![0.0; self.net.actions()];
            dq[exp.action] = 2.0 * err / batch as f64;
            self.net.backward_into(&fwd, &dq, &mut grads)?;
        }
        if self.cfg.grad_clip > 0.0 {
            let norm = grads.grad_norm();
            if norm > self.cfg.grad_clip {
                grads.scale(self.cfg.grad_clip / norm);
            }
        }
        self.opt.step(&mut self.net, &grads);
        if !self.net.is_finite() {
            return Err(Error::Numerical("network parameters diverged".into()));
        }
        self.updates += 1;
        if let Some(target) = &mut self.target {
            if self.updates % self.cfg.target_sync as u64 == 0 {
                target.clone_from(&self.net);
            }
        }
        Ok(Some(loss / batch as f64))
    }
}
