//! Games the self-play loop can drive.

use super::grid::ActionGrid;
use super::selfplay::{Transition, TwoPlayerGame};
use crate::adversary::AttackVector;
use crate::env::{CarFollowingEnv, EnvConfig, PlayerObservation, StepOutcome};
use crate::error::Result;
use crate::fusion::SENSOR_COUNT;
use crate::rng::SimRng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Per-step input features: four action coordinates plus one deviation feature.
pub const FEATURES_PER_STEP: usize = SENSOR_COUNT + 1;

/// Turns observation windows into network input sequences.
///
/// Weights enter as they are. Injections are divided by their thresholds so
/// they lie in `[−1, 1]`. The deviation enters as `asinh(λT²δ)`, the signed
/// spacing error in meters compressed logarithmically for large values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    spacing_per_deviation: f64,
    attack_scale: [f64; SENSOR_COUNT],
}

impl FeatureMap {
    pub fn new(cfg: &EnvConfig) -> Self {
        let attack_scale = cfg.scenario.tau.map(|t| if t > 0.0 { 1.0 / t } else { 0.0 });
        Self { spacing_per_deviation: cfg.follow.spacing_per_deviation(), attack_scale }
    }

    pub fn deviation_feature(&self, delta: f64) -> f64 {
        (self.spacing_per_deviation * delta).asinh()
    }

    pub fn av_features(&self, obs: &PlayerObservation) -> Vec<f64> {
        self.encode(obs, [1.0; SENSOR_COUNT])
    }

    pub fn att_features(&self, obs: &PlayerObservation) -> Vec<f64> {
        self.encode(obs, self.attack_scale)
    }

    fn encode(&self, obs: &PlayerObservation, scale: [f64; SENSOR_COUNT]) -> Vec<f64> {
        let mut out = Vec::with_capacity(obs.window() * FEATURES_PER_STEP);
        for (a, d) in obs.actions().zip(obs.deviations()) {
            for k in 0..SENSOR_COUNT {
                out.push(a[k] * scale[k]);
            }
            out.push(self.deviation_feature(d));
        }
        out
    }
}

/// One logged step of the car-following game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarFollowingStep {
    pub w: [f64; SENSOR_COUNT],
    pub a: [f64; SENSOR_COUNT],
    pub outcome: StepOutcome,
}

/// The follower-vs-attacker game over a discretized action grid.
#[derive(Debug, Clone)]
pub struct CarFollowingGame {
    env: CarFollowingEnv,
    grid: ActionGrid,
    features: FeatureMap,
    rng: SimRng,
}

impl CarFollowingGame {
    pub fn new(cfg: EnvConfig, grid: ActionGrid, rng: SimRng) -> Result<Self> {
        let env = CarFollowingEnv::new(cfg)?;
        Ok(Self { features: FeatureMap::new(&cfg), env, grid, rng })
    }

    pub fn env(&self) -> &CarFollowingEnv {
        &self.env
    }

    pub fn grid(&self) -> &ActionGrid {
        &self.grid
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }
}

impl TwoPlayerGame for CarFollowingGame {
    type Record = CarFollowingStep;

    fn av_action_count(&self) -> usize {
        self.grid.av_actions().len()
    }

    fn att_action_count(&self) -> usize {
        self.grid.att_actions().len()
    }

    fn av_input_dim(&self) -> usize {
        FEATURES_PER_STEP
    }

    fn att_input_dim(&self) -> usize {
        FEATURES_PER_STEP
    }

    fn reset(&mut self) -> Result<()> {
        self.env.reset();
        Ok(())
    }

    fn av_state(&self) -> Arc<[f64]> {
        Arc::from(self.features.av_features(self.env.observations().0))
    }

    fn att_state(&self) -> Arc<[f64]> {
        Arc::from(self.features.att_features(self.env.observations().1))
    }

    fn step(&mut self, av: usize, att: usize) -> Result<Transition<CarFollowingStep>> {
        let w = *self.grid.av(av)?;
        let a: AttackVector = *self.grid.att(att)?;
        let outcome = self.env.step(&w, &a, &mut self.rng)?;
        Ok(Transition {
            u_av: outcome.u_av,
            u_att: outcome.u_att,
            regret: outcome.regret,
            abs_deviation: outcome.delta.abs(),
            spacing_dev: outcome.spacing_dev,
            terminal: outcome.collision,
            record: CarFollowingStep { w: *w.as_array(), a: *a.as_array(), outcome },
        })
    }
}

/// Stateless 2×2 zero-sum game: the follower scores +1 on a match, the
/// attacker +1 on a mismatch.
#[derive(Debug, Clone, Default)]
pub struct MatchingPennies;

impl TwoPlayerGame for MatchingPennies {
    type Record = (usize, usize);

    fn av_action_count(&self) -> usize {
        2
    }

    fn att_action_count(&self) -> usize {
        2
    }

    fn av_input_dim(&self) -> usize {
        1
    }

    fn att_input_dim(&self) -> usize {
        1
    }

    fn reset(&mut self) -> Result<()> {
        Ok(())
    }

    fn av_state(&self) -> Arc<[f64]> {
        Arc::from(vec![1.0])
    }

    fn att_state(&self) -> Arc<[f64]> {
        Arc::from(vec![1.0])
    }

    fn step(&mut self, av: usize, att: usize) -> Result<Transition<(usize, usize)>> {
        let u_att = if av == att { -1.0 } else { 1.0 };
        Ok(Transition {
            u_av: -u_att,
            u_att,
            regret: u_att,
            abs_deviation: 0.0,
            spacing_dev: 0.0,
            terminal: false,
            record: (av, att),
        })
    }
}
