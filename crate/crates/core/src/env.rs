//! The repeated zero-sum game between the follower and the attacker.
//!
//! Each step the follower commits to fusion weights `w(n)` and the attacker
//! to an injection `a(n)`. The estimate error `term(n) = w·e + w·a` feeds the
//! speed lag, and the spacing error it causes after all lags have played
//! out is `−λT²·δ(n)` where
//!
//! ```text
//! θ(n) = Σ_{l=0}^{min(n̄, n)} q^l · term(n − l),     δ(n) = δ(n − 1) + θ(n)
//! ```
//!
//! with `q = 1 − λT`. The follower's regret is `R(n) = λ²T⁴·δ(n)²`; the
//! attacker's utility is `+R(n)`.

use crate::adversary::{apply_attack, AttackScenario, AttackVector};
use crate::dynamics::{self, FollowConfig, VehicleState};
use crate::error::{Error, Result};
use crate::fusion::{fused_estimate, measure, MeasurementJacobian, NoiseModel, WeightVector, SENSOR_COUNT};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// `Σ_l q^l · terms[l]` over a newest-first slice.
pub fn theta(terms_newest_first: &[f64], q: f64) -> f64 {
    let mut weight = 1.0;
    let mut acc = 0.0;
    for t in terms_newest_first {
        acc += weight * t;
        weight *= q;
    }
    acc
}

/// Literal double sum for δ(n) over a full oldest-first term history.
///
/// Quadratic in the history length; kept as the reference the incremental
/// [`DeviationState`] is checked against.
pub fn deviation_direct(terms: &[f64], q: f64, depth: usize) -> f64 {
    let mut delta = 0.0;
    for p in 0..terms.len() {
        for l in 0..=depth.min(p) {
            delta += q.powi(l as i32) * terms[p - l];
        }
    }
    delta
}

/// Accumulated deviation with the ring of recent error terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationState {
    q: f64,
    depth: usize,
    /// Newest at the front; at most `depth + 1` entries.
    terms: VecDeque<f64>,
    delta: f64,
    last_theta: f64,
    n: usize,
}

impl DeviationState {
    pub fn new(cfg: &FollowConfig) -> Self {
        Self::with_params(cfg.decay(), cfg.history_depth)
    }

    pub fn with_params(q: f64, depth: usize) -> Self {
        Self { q, depth, terms: VecDeque::with_capacity(depth + 1), delta: 0.0, last_theta: 0.0, n: 0 }
    }

    /// Records `term(n)` and returns θ(n).
    pub fn push(&mut self, term: f64) -> f64 {
        if self.terms.len() == self.depth + 1 {
            self.terms.pop_back();
        }
        self.terms.push_front(term);
        let (a, b) = self.terms.as_slices();
        let mut weight = 1.0;
        let mut acc = 0.0;
        for t in a.iter().chain(b) {
            acc += weight * t;
            weight *= self.q;
        }
        self.last_theta = acc;
        self.delta += acc;
        self.n += 1;
        acc
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn last_theta(&self) -> f64 {
        self.last_theta
    }

    /// Number of recorded terms.
    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn recent_terms(&self) -> impl Iterator<Item = f64> + '_ {
        self.terms.iter().copied()
    }

    /// θ(n+1) without its newest term: `Σ_{l≥1} q^l · term(n+1−l)`.
    pub fn carried_theta(&self) -> f64 {
        let mut weight = self.q;
        let mut acc = 0.0;
        for t in self.terms.iter().take(self.depth) {
            acc += weight * t;
            weight *= self.q;
        }
        acc
    }
}

/// `λ²T⁴δ²` (m²).
pub fn regret(delta: f64, cfg: &FollowConfig) -> f64 {
    let s = cfg.spacing_per_deviation() * delta;
    s * s
}

/// `λT²|δ|` (m).
pub fn spacing_deviation(delta: f64, cfg: &FollowConfig) -> f64 {
    cfg.spacing_per_deviation() * delta.abs()
}

/// Leader speed process: mean `nu` with optional per-step Gaussian jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeaderProcess {
    pub nu: f64,
    pub sigma_lead: f64,
}

impl LeaderProcess {
    pub fn constant(nu: f64) -> Self {
        Self { nu, sigma_lead: 0.0 }
    }

    pub fn validate(&self, cfg: &FollowConfig) -> Result<()> {
        if !(self.nu >= 0.0 && self.nu <= cfg.v_max) {
            return Err(Error::config("nu", format!("leader speed must lie in [0, {}], got {}", cfg.v_max, self.nu)));
        }
        if !(self.sigma_lead >= 0.0 && self.sigma_lead.is_finite()) {
            return Err(Error::config("sigma_lead", format!("must be nonnegative, got {}", self.sigma_lead)));
        }
        Ok(())
    }
}

impl Default for LeaderProcess {
    fn default() -> Self {
        Self::constant(20.0)
    }
}

/// One player's view: its own recent actions and the shared deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerObservation {
    window: usize,
    /// Oldest first, always exactly `window` entries (zero padded).
    actions: VecDeque<[f64; SENSOR_COUNT]>,
    deviations: VecDeque<f64>,
}

impl PlayerObservation {
    pub fn empty(window: usize) -> Self {
        Self {
            window,
            actions: std::iter::repeat_n([0.0; SENSOR_COUNT], window).collect(),
            deviations: std::iter::repeat_n(0.0, window).collect(),
        }
    }

    fn push(&mut self, action: [f64; SENSOR_COUNT], delta: f64) {
        if self.window == 0 {
            return;
        }
        self.actions.pop_front();
        self.actions.push_back(action);
        self.deviations.pop_front();
        self.deviations.push_back(delta);
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn actions(&self) -> impl ExactSizeIterator<Item = &[f64; SENSOR_COUNT]> {
        self.actions.iter()
    }

    pub fn deviations(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.deviations.iter().copied()
    }
}

/// Result of one synchronized step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub regret: f64,
    pub u_av: f64,
    pub u_att: f64,
    pub term: f64,
    pub theta: f64,
    pub delta: f64,
    /// Physical spacing after the step (m).
    pub spacing: f64,
    /// `λT²|δ|` (m).
    pub spacing_dev: f64,
    pub follower_speed: f64,
    pub leader_speed: f64,
    pub collision: bool,
    pub speed_clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub follow: FollowConfig,
    pub noise: NoiseModel,
    pub jacobian: MeasurementJacobian,
    pub scenario: AttackScenario,
    pub leader: LeaderProcess,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.leader.validate(&self.follow)?;
        NoiseModel::new(self.noise.sigma)?;
        AttackScenario::new(self.scenario.mask, self.scenario.tau)?;
        if self.jacobian.0.iter().all(|h| *h == 0.0) {
            return Err(Error::config("jacobian", "must not be all zeros"));
        }
        Ok(())
    }
}

/// Leader/follower pair with the deviation bookkeeping of the game.
#[derive(Debug, Clone)]
pub struct CarFollowingEnv {
    cfg: EnvConfig,
    state: VehicleState,
    deviation: DeviationState,
    av_obs: PlayerObservation,
    att_obs: PlayerObservation,
    terminated: bool,
    clamp_events: usize,
}

impl CarFollowingEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let window = cfg.follow.history_depth;
        let mut env = Self {
            cfg,
            state: VehicleState { v: 0.0, v_lead: 0.0, d: 0.0, n: 0 },
            deviation: DeviationState::new(&cfg.follow),
            av_obs: PlayerObservation::empty(window),
            att_obs: PlayerObservation::empty(window),
            terminated: false,
            clamp_events: 0,
        };
        env.reset();
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    /// Warm start: follower at rest at the initial spacing for speed ν.
    pub fn reset(&mut self) -> (&PlayerObservation, &PlayerObservation) {
        let follow = &self.cfg.follow;
        let nu = self.cfg.leader.nu;
        self.state = VehicleState { v: 0.0, v_lead: nu, d: dynamics::initial_spacing(nu, follow), n: 0 };
        self.deviation = DeviationState::new(follow);
        self.av_obs = PlayerObservation::empty(follow.history_depth);
        self.att_obs = PlayerObservation::empty(follow.history_depth);
        self.terminated = false;
        self.clamp_events = 0;
        (&self.av_obs, &self.att_obs)
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    pub fn deviation(&self) -> &DeviationState {
        &self.deviation
    }

    pub fn observations(&self) -> (&PlayerObservation, &PlayerObservation) {
        (&self.av_obs, &self.att_obs)
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    pub fn clamp_events(&self) -> usize {
        self.clamp_events
    }

    /// Current regret `λ²T⁴δ²`.
    pub fn regret(&self) -> f64 {
        regret(self.deviation.delta(), &self.cfg.follow)
    }

    /// Advances one sampling period.
    ///
    /// Random draws per step: one leader jitter, then four sensor noises.
    pub fn step<R: Rng + ?Sized>(&mut self, w: &WeightVector, a: &AttackVector, rng: &mut R) -> Result<StepOutcome> {
        if self.terminated {
            return Err(Error::EpisodeTerminated);
        }
        let follow = self.cfg.follow;
        let leader = self.cfg.leader;
        let jitter: f64 = rng.sample(StandardNormal);
        let v_lead = (leader.nu + leader.sigma_lead * jitter).clamp(0.0, follow.v_max);

        let z = measure(v_lead, &self.cfg.jacobian, &self.cfg.noise, rng);
        let v_est = fused_estimate(&apply_attack(&z, a), w);

        let raw = dynamics::raw_speed_update(self.state.v, v_est, &follow);
        let v_next = raw.clamp(0.0, follow.v_max);
        let speed_clamped = raw != v_next;
        if speed_clamped {
            self.clamp_events += 1;
            log::debug!("follower speed clamped from {raw:.3} to {v_next:.3} at step {}", self.state.n);
        }
        let d_next = dynamics::spacing_update(self.state.d, v_lead, v_next, follow.period);

        let mut err = [0.0; SENSOR_COUNT];
        for k in 0..SENSOR_COUNT {
            err[k] = z.0[k] - self.cfg.jacobian.0[k] * v_lead;
        }
        let term = w.dot(&err) + w.dot(a.as_array());
        let theta = self.deviation.push(term);
        let delta = self.deviation.delta();
        let r = regret(delta, &follow);

        self.av_obs.push(*w.as_array(), delta);
        self.att_obs.push(*a.as_array(), delta);
        self.state = VehicleState { v: v_next, v_lead, d: d_next, n: self.state.n + 1 };
        let collision = d_next <= 0.0;
        if collision {
            log::info!("collision at step {}: spacing {d_next:.3} m", self.state.n);
            self.terminated = true;
        }

        Ok(StepOutcome {
            regret: r,
            u_av: -r,
            u_att: r,
            term,
            theta,
            delta,
            spacing: d_next,
            spacing_dev: spacing_deviation(delta, &follow),
            follower_speed: v_next,
            leader_speed: v_lead,
            collision,
            speed_clamped,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{ScenarioKind, ValidationMode, DEFAULT_THRESHOLDS};
    use crate::fusion::{inverse_variance_weights, Sensor};
    use crate::rng::{stream, Stream};

    fn env_cfg(kind: ScenarioKind, noise: NoiseModel) -> EnvConfig {
        EnvConfig {
            follow: FollowConfig::default(),
            noise,
            jacobian: MeasurementJacobian::direct(),
            scenario: AttackScenario::from_kind(kind, DEFAULT_THRESHOLDS).unwrap(),
            leader: LeaderProcess::default(),
        }
    }

    #[test]
    fn theta_examples() {
        assert_eq!(theta(&[0.0; 10], 0.9), 0.0);
        assert_eq!(theta(&[0.5], 0.3), 0.5);
        assert!((theta(&[1.0, 1.0], 0.9) - 1.9).abs() < 1e-15);
    }

    #[test]
    fn deviation_zero_history_stays_zero() {
        let mut st = DeviationState::new(&FollowConfig::default());
        for _ in 0..500 {
            st.push(0.0);
        }
        assert_eq!(st.delta(), 0.0);
    }

    #[test]
    fn deviation_full_tracking_counts_steps() {
        let cfg = FollowConfig::new(1.0, 1.0, 1e-3, 2.0, 1.5, 40.0).unwrap();
        let mut st = DeviationState::new(&cfg);
        for n in 0..50 {
            st.push(0.7);
            assert!((st.delta() - (n + 1) as f64 * 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn recursion_matches_direct_sum() {
        use rand::Rng;
        let cfg = FollowConfig::default();
        let mut rng = stream(5, Stream::Init);
        for _ in 0..10 {
            let terms: Vec<f64> = (0..200).map(|_| rng.random_range(-1.5..1.5)).collect();
            let mut st = DeviationState::new(&cfg);
            for k in 0..terms.len() {
                st.push(terms[k]);
                let direct = deviation_direct(&terms[..=k], cfg.decay(), cfg.history_depth);
                let rel = (st.delta() - direct).abs() / direct.abs().max(1e-12);
                assert!(rel <= 1e-9 || (st.delta() - direct).abs() < 1e-12, "k={k}");
            }
        }
    }

    #[test]
    fn carried_theta_excludes_newest_term() {
        let cfg = FollowConfig::default();
        let mut st = DeviationState::new(&cfg);
        for t in [0.3, -0.2, 0.9, 0.1] {
            st.push(t);
        }
        let carried = st.carried_theta();
        let mut next = st.clone();
        let th = next.push(0.25);
        assert!((th - 0.25 - carried).abs() < 1e-15);
    }

    #[test]
    fn regret_examples() {
        let cfg = FollowConfig::default();
        assert_eq!(regret(0.0, &cfg), 0.0);
        assert!((regret(100.0, &cfg) - 1.0).abs() < 1e-12);
        assert!((spacing_deviation(-100.0, &cfg) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_beacon_attack_step() {
        let cfg = env_cfg(ScenarioKind::BeaconOnly, NoiseModel::noiseless());
        let mut env = CarFollowingEnv::new(cfg).unwrap();
        let a = cfg.scenario.validate([0.0, 0.0, 1.0, 0.0], ValidationMode::Strict).unwrap();
        let out = env.step(&WeightVector::one_hot(Sensor::Beacon), &a, &mut stream(1, Stream::Environment)).unwrap();
        assert!((out.term - 1.0).abs() < 1e-12);
        assert!((out.delta - 1.0).abs() < 1e-12);
        assert!((out.regret - 1e-4).abs() < 1e-15);
        assert!((out.spacing_dev - 0.01).abs() < 1e-12);
        assert_eq!(out.u_av + out.u_att, 0.0);
    }

    #[test]
    fn noiseless_unattacked_regret_is_zero() {
        let cfg = env_cfg(ScenarioKind::None, NoiseModel::noiseless());
        let mut env = CarFollowingEnv::new(cfg).unwrap();
        let w = inverse_variance_weights(&NoiseModel::default());
        let mut rng = stream(2, Stream::Environment);
        for _ in 0..300 {
            let out = env.step(&w, &AttackVector::zero(), &mut rng).unwrap();
            assert_eq!(out.regret, 0.0);
        }
    }

    #[test]
    fn reset_state() {
        let cfg = env_cfg(ScenarioKind::BeaconOnly, NoiseModel::default());
        let mut env = CarFollowingEnv::new(cfg).unwrap();
        env.step(&WeightVector::uniform(), &AttackVector::zero(), &mut stream(3, Stream::Environment)).unwrap();
        env.reset();
        assert_eq!(env.regret(), 0.0);
        assert!((env.state().d - dynamics::initial_spacing(20.0, &cfg.follow)).abs() < 1e-12);
        let (av, att) = env.observations();
        assert_eq!(av.window(), 66);
        assert!(av.deviations().all(|d| d == 0.0));
        assert!(att.actions().all(|a| *a == [0.0; 4]));
        assert_eq!(env.observations(), CarFollowingEnv::new(cfg).unwrap().observations());
    }

    #[test]
    fn replay_is_bit_identical() {
        let cfg = env_cfg(ScenarioKind::All, NoiseModel::default());
        let a = cfg.scenario.validate([0.5, -1.0, 0.25, 1.5], ValidationMode::Strict).unwrap();
        let run = || {
            let mut env = CarFollowingEnv::new(cfg).unwrap();
            let mut rng = stream(4, Stream::Environment);
            (0..200).map(|_| env.step(&WeightVector::uniform(), &a, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn collision_terminates_episode() {
        let mut cfg = env_cfg(ScenarioKind::All, NoiseModel::noiseless());
        cfg.scenario.tau = [10.0; 4];
        let mut env = CarFollowingEnv::new(cfg).unwrap();
        let a = cfg.scenario.validate([10.0; 4], ValidationMode::Strict).unwrap();
        let mut rng = stream(5, Stream::Environment);
        let mut collided = false;
        for _ in 0..5000 {
            if env.step(&WeightVector::uniform(), &a, &mut rng).unwrap().collision {
                collided = true;
                break;
            }
        }
        assert!(collided);
        assert!(matches!(env.step(&WeightVector::uniform(), &a, &mut rng), Err(Error::EpisodeTerminated)));
    }

    #[test]
    fn spacing_tracks_deviation_after_warm_up() {
        let cfg = env_cfg(ScenarioKind::All, NoiseModel::default());
        let mut env = CarFollowingEnv::new(cfg).unwrap();
        let a = cfg.scenario.validate([0.25, -0.5, 0.5, 0.75], ValidationMode::Strict).unwrap();
        let o = dynamics::safe_spacing(cfg.leader.nu, &cfg.follow);
        let mut rng = stream(6, Stream::Environment);
        for n in 1..=300 {
            let out = env.step(&WeightVector::uniform(), &a, &mut rng).unwrap();
            if n >= cfg.follow.history_depth {
                let physical = out.spacing - o;
                let model = -cfg.follow.spacing_per_deviation() * out.delta;
                assert!((physical - model).abs() <= 0.05, "n={n}: {physical} vs {model}");
            }
        }
    }
}
