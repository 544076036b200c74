//! Simultaneous-move self-play between two Q-learners.

use super::learner::{greedy_action, QLearner};
use super::qnet::LstmQNet;
use super::replay::Experience;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Result of one synchronized step of a [`TwoPlayerGame`].
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<R> {
    pub u_av: f64,
    pub u_att: f64,
    pub regret: f64,
    pub abs_deviation: f64,
    pub spacing_dev: f64,
    pub terminal: bool,
    pub record: R,
}

/// A two-player zero-sum game with per-player observation sequences.
pub trait TwoPlayerGame {
    type Record;

    fn av_action_count(&self) -> usize;
    fn att_action_count(&self) -> usize;
    /// Features per sequence step for the follower.
    fn av_input_dim(&self) -> usize;
    fn att_input_dim(&self) -> usize;
    fn reset(&mut self) -> Result<()>;
    fn av_state(&self) -> Arc<[f64]>;
    fn att_state(&self) -> Arc<[f64]>;
    fn step(&mut self, av: usize, att: usize) -> Result<Transition<Self::Record>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Exploration {
    /// `max(end, start·decay^episode)`.
    Exponential { start: f64, end: f64, decay: f64 },
    Fixed(f64),
}

impl Default for Exploration {
    fn default() -> Self {
        Exploration::Exponential { start: 1.0, end: 0.05, decay: 0.9 }
    }
}

impl Exploration {
    pub fn rate(&self, episode: usize) -> f64 {
        match *self {
            Exploration::Fixed(eps) => eps,
            Exploration::Exponential { start, end, decay } => {
                let e = episode.min(i32::MAX as usize) as i32;
                (start * decay.powi(e)).max(end)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |field: &'static str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(Error::config(field, format!("must lie in [0, 1], got {x}")))
            }
        };
        match *self {
            Exploration::Fixed(eps) => unit("eps_explore", eps),
            Exploration::Exponential { start, end, decay } => {
                unit("eps_start", start)?;
                unit("eps_end", end)?;
                if !(decay > 0.0 && decay <= 1.0) {
                    return Err(Error::config("eps_decay", format!("must lie in (0, 1], got {decay}")));
                }
                Ok(())
            }
        }
    }
}

/// Stop once the moving average of per-episode mean regret settles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauRule {
    /// Episodes per moving-average window.
    pub window: usize,
    /// Distance in episodes between the two compared averages.
    pub span: usize,
    /// Relative change below which training stops.
    pub tolerance: f64,
}

impl Default for PlateauRule {
    fn default() -> Self {
        Self { window: 50, span: 100, tolerance: 0.01 }
    }
}

impl PlateauRule {
    pub fn converged(&self, mean_regret: &[f64]) -> bool {
        let n = mean_regret.len();
        if self.window == 0 || n < self.window + self.span {
            return false;
        }
        let avg = |end: usize| mean_regret[end - self.window..end].iter().sum::<f64>() / self.window as f64;
        let now = avg(n);
        let then = avg(n - self.span);
        (now - then).abs() <= self.tolerance * then.abs()
    }
}

/// How per-step utilities are turned into the learners' training signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum UtilityShaping {
    /// The utility as the game reports it.
    #[default]
    Raw,
    /// `(U(n) − U(n−1))/(1 − γ)` with `U(−1) = 0`: potential-based shaping
    /// with potential `U/(1 − γ)`. When the utility is a function of the
    /// post-step state, as the regret is, greedy policies are unchanged
    /// while the large state-dependent part of the value disappears.
    Increment,
}

impl std::str::FromStr for UtilityShaping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Self::Raw),
            "increment" => Ok(Self::Increment),
            other => Err(Error::config("utility_shaping", format!("expected raw or increment, got {other:?}"))),
        }
    }
}

impl UtilityShaping {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Raw => "raw",
            Self::Increment => "increment",
        }
    }

    fn apply(&self, u: f64, prev: f64, gamma: f64) -> f64 {
        match self {
            Self::Raw => u,
            Self::Increment => (u - prev) / (1.0 - gamma),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfPlayConfig {
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub exploration: Exploration,
    /// Utilities are divided by this before they reach the learners.
    pub utility_scale: f64,
    pub shaping: UtilityShaping,
    /// Train both learners every this many environment steps.
    pub train_every: usize,
    pub plateau: Option<PlateauRule>,
}

impl Default for SelfPlayConfig {
    fn default() -> Self {
        Self {
            episodes: 40,
            steps_per_episode: 1000,
            exploration: Exploration::default(),
            utility_scale: 1.0,
            shaping: UtilityShaping::Raw,
            train_every: 1,
            plateau: Some(PlateauRule::default()),
        }
    }
}

impl SelfPlayConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::config("episodes", "must be positive"));
        }
        if self.steps_per_episode == 0 {
            return Err(Error::config("steps", "must be positive"));
        }
        if !(self.utility_scale > 0.0 && self.utility_scale.is_finite()) {
            return Err(Error::config("utility_scale", format!("must be positive, got {}", self.utility_scale)));
        }
        if self.train_every == 0 {
            return Err(Error::config("train_every", "must be positive"));
        }
        self.exploration.validate()
    }
}

/// Per-episode training summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: usize,
    pub steps: usize,
    pub eps: f64,
    pub mean_regret: f64,
    pub mean_abs_deviation: f64,
    pub mean_spacing_dev: f64,
    pub terminated: bool,
    pub av_loss: Option<f64>,
    pub att_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub episodes: Vec<EpisodeStats>,
    /// Episode after which the plateau rule stopped training.
    pub converged_at: Option<usize>,
    pub total_steps: usize,
}

impl TrainingHistory {
    pub fn mean_regrets(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.mean_regret).collect()
    }
}

/// What the per-step callback sees.
#[derive(Debug)]
pub struct StepEvent<'a, R> {
    pub episode: usize,
    pub step: usize,
    pub eps: f64,
    pub av_action: usize,
    pub att_action: usize,
    pub transition: &'a Transition<R>,
}

#[derive(Default)]
struct EpisodeAcc {
    steps: usize,
    regret: f64,
    dev: f64,
    spacing: f64,
    av_loss: (f64, usize),
    att_loss: (f64, usize),
}

impl EpisodeAcc {
    fn add<R>(&mut self, tr: &Transition<R>) {
        self.steps += 1;
        self.regret += tr.regret;
        self.dev += tr.abs_deviation;
        self.spacing += tr.spacing_dev;
    }

    fn finish(self, episode: usize, eps: f64, terminated: bool) -> EpisodeStats {
        let n = self.steps.max(1) as f64;
        let mean = |(s, k): (f64, usize)| (k > 0).then(|| s / k as f64);
        EpisodeStats {
            episode,
            steps: self.steps,
            eps,
            mean_regret: self.regret / n,
            mean_abs_deviation: self.dev / n,
            mean_spacing_dev: self.spacing / n,
            terminated,
            av_loss: mean(self.av_loss),
            att_loss: mean(self.att_loss),
        }
    }
}

fn check_dims<G: TwoPlayerGame>(game: &G, av: &LstmQNet, att: &LstmQNet) -> Result<()> {
    if av.actions() != game.av_action_count() || att.actions() != game.att_action_count() {
        return Err(Error::Contract(format!(
            "networks have {}/{} actions, game has {}/{}",
            av.actions(),
            att.actions(),
            game.av_action_count(),
            game.att_action_count()
        )));
    }
    if av.input_dim() != game.av_input_dim() || att.input_dim() != game.att_input_dim() {
        return Err(Error::Contract("network input sizes do not match the game features".into()));
    }
    Ok(())
}

/// Trains both learners against each other.
///
/// Each step both pick ε-greedy actions simultaneously, the game advances,
/// both store their experience and (every `train_every` steps) take one
/// gradient step.
pub fn self_play<G, F>(game: &mut G, av: &mut QLearner, att: &mut QLearner, cfg: &SelfPlayConfig, mut on_step: F) -> Result<TrainingHistory>
where
    G: TwoPlayerGame,
    F: FnMut(StepEvent<'_, G::Record>) -> Result<()>,
{
    cfg.validate()?;
    check_dims(game, av.net(), att.net())?;
    let (g_av, g_att) = (av.config().gamma, att.config().gamma);
    if cfg.shaping == UtilityShaping::Increment && (g_av >= 1.0 || g_att >= 1.0) {
        return Err(Error::config("utility_shaping", "increment shaping needs gamma < 1"));
    }
    let mut history = TrainingHistory::default();
    let mut regrets = Vec::with_capacity(cfg.episodes);
    for episode in 0..cfg.episodes {
        game.reset()?;
        let eps = cfg.exploration.rate(episode);
        let mut s_av = game.av_state();
        let mut s_att = game.att_state();
        let mut acc = EpisodeAcc::default();
        let mut terminated = false;
        let mut prev = (0.0, 0.0);
        for step in 0..cfg.steps_per_episode {
            let a = av.act(&s_av, eps)?;
            let b = att.act(&s_att, eps)?;
            let tr = game.step(a, b)?;
            let n_av = game.av_state();
            let n_att = game.att_state();
            av.remember(Experience {
                state: s_av,
                action: a,
                utility: cfg.shaping.apply(tr.u_av, prev.0, g_av) / cfg.utility_scale,
                next_state: n_av.clone(),
                initial: step == 0,
                cutoff: tr.terminal && av.config().terminal_cutoff,
            });
            att.remember(Experience {
                state: s_att,
                action: b,
                utility: cfg.shaping.apply(tr.u_att, prev.1, g_att) / cfg.utility_scale,
                next_state: n_att.clone(),
                initial: step == 0,
                cutoff: tr.terminal && att.config().terminal_cutoff,
            });
            prev = (tr.u_av, tr.u_att);
            history.total_steps += 1;
            if history.total_steps % cfg.train_every == 0 {
                if let Some(l) = av.train_step()? {
                    acc.av_loss.0 += l;
                    acc.av_loss.1 += 1;
                }
                if let Some(l) = att.train_step()? {
                    acc.att_loss.0 += l;
                    acc.att_loss.1 += 1;
                }
            }
            acc.add(&tr);
            on_step(StepEvent { episode, step, eps, av_action: a, att_action: b, transition: &tr })?;
            s_av = n_av;
            s_att = n_att;
            if tr.terminal {
                terminated = true;
                break;
            }
        }
        let stats = acc.finish(episode, eps, terminated);
        log::info!(
            "episode {episode}: eps {eps:.3} mean regret {:.4} mean |spacing dev| {:.3} m{}",
            stats.mean_regret,
            stats.mean_spacing_dev,
            if terminated { " (collision)" } else { "" }
        );
        regrets.push(stats.mean_regret);
        history.episodes.push(stats);
        if let Some(rule) = &cfg.plateau {
            if rule.converged(&regrets) {
                log::info!("regret plateau reached after episode {episode}");
                history.converged_at = Some(episode);
                break;
            }
        }
    }
    Ok(history)
}

/// How a player acts during a rollout without learning.
#[derive(Debug, Clone, Copy)]
pub enum Controller<'a> {
    Greedy(&'a LstmQNet),
    Fixed(usize),
}

impl Controller<'_> {
    fn act(&self, state: &[f64]) -> Result<usize> {
        match self {
            Controller::Fixed(i) => Ok(*i),
            Controller::Greedy(net) => {
                let q = net.q_values(state)?;
                if q.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Numerical("non-finite Q-value".into()));
                }
                Ok(greedy_action(&q))
            }
        }
    }
}

/// Plays episodes with frozen controllers (ε = 0, no learning).
pub fn rollout<G, F>(game: &mut G, av: Controller<'_>, att: Controller<'_>, episodes: usize, steps: usize, mut on_step: F) -> Result<TrainingHistory>
where
    G: TwoPlayerGame,
    F: FnMut(StepEvent<'_, G::Record>) -> Result<()>,
{
    for (c, count, dim) in [(av, game.av_action_count(), game.av_input_dim()), (att, game.att_action_count(), game.att_input_dim())] {
        match c {
            Controller::Greedy(net) if net.actions() != count || net.input_dim() != dim => {
                return Err(Error::Contract("controller network does not match the game".into()))
            }
            Controller::Fixed(i) if i >= count => return Err(Error::Contract(format!("fixed action {i} outside grid of {count}"))),
            _ => {}
        }
    }
    let mut history = TrainingHistory::default();
    for episode in 0..episodes {
        game.reset()?;
        let mut acc = EpisodeAcc::default();
        let mut terminated = false;
        for step in 0..steps {
            let a = av.act(&game.av_state())?;
            let b = att.act(&game.att_state())?;
            let tr = game.step(a, b)?;
            history.total_steps += 1;
            acc.add(&tr);
            on_step(StepEvent { episode, step, eps: 0.0, av_action: a, att_action: b, transition: &tr })?;
            if tr.terminal {
                terminated = true;
                break;
            }
        }
        history.episodes.push(acc.finish(episode, 0.0, terminated));
    }
    Ok(history)
}
