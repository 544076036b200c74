//! Static inverse-variance fusion, the non-learning reference.

use crate::env::{CarFollowingEnv, EnvConfig};
use crate::error::{Error, Result};
use crate::fusion::{inverse_variance_weights, WeightVector};
use crate::rl::games::{CarFollowingStep, FeatureMap};
use crate::rl::grid::ActionGrid;
use crate::rl::learner::greedy_action;
use crate::rl::qnet::LstmQNet;
use crate::rl::selfplay::{EpisodeStats, TrainingHistory, Transition};
use crate::rng::SimRng;

/// Opponent of the static-weight follower.
#[derive(Debug, Clone, Copy)]
pub enum BaselineAttacker<'a> {
    /// Always the zero injection.
    Idle,
    /// Greedy play of a trained attacker network.
    Frozen(&'a LstmQNet),
    /// Per-step exhaustive maximization of the expected next regret.
    WorstGrid,
}

/// Index of the grid attack maximizing `(δ(n−1) + carried + wᵀa)²`, which
/// is the next regret up to the action-independent noise variance.
pub fn worst_grid_action(env: &CarFollowingEnv, grid: &ActionGrid, w: &WeightVector) -> usize {
    let dev = env.deviation();
    let base = dev.delta() + dev.carried_theta();
    let mut best = (0, f64::NEG_INFINITY);
    for (j, a) in grid.att_actions().iter().enumerate() {
        let x = base + w.dot(a.as_array());
        if x * x > best.1 {
            best = (j, x * x);
        }
    }
    best.0
}

/// Runs the environment with `w` fixed to the inverse-variance weights.
///
/// `on_step(episode, step, transition)` sees every step. The history
/// mirrors the learned-rollout format.
pub fn kalman_static_run<F>(
    cfg: &EnvConfig,
    grid: &ActionGrid,
    attacker: BaselineAttacker<'_>,
    episodes: usize,
    steps: usize,
    rng: &mut SimRng,
    mut on_step: F,
) -> Result<TrainingHistory>
where
    F: FnMut(usize, usize, &Transition<CarFollowingStep>) -> Result<()>,
{
    let w = inverse_variance_weights(&cfg.noise);
    let features = FeatureMap::new(cfg);
    if let BaselineAttacker::Frozen(net) = attacker {
        if net.actions() != grid.att_actions().len() {
            return Err(Error::Contract(format!(
                "attacker network has {} actions, grid has {}",
                net.actions(),
                grid.att_actions().len()
            )));
        }
    }
    let mut env = CarFollowingEnv::new(*cfg)?;
    let mut history = TrainingHistory::default();
    for episode in 0..episodes {
        env.reset();
        let (mut regret, mut dev, mut spacing, mut n) = (0.0, 0.0, 0.0, 0usize);
        let mut terminated = false;
        for step in 0..steps {
            let j = match attacker {
                BaselineAttacker::Idle => None,
                BaselineAttacker::WorstGrid => Some(worst_grid_action(&env, grid, &w)),
                BaselineAttacker::Frozen(net) => {
                    let q = net.q_values(&features.att_features(env.observations().1))?;
                    if q.iter().any(|x| !x.is_finite()) {
                        return Err(Error::Numerical("non-finite attacker Q-value".into()));
                    }
                    Some(greedy_action(&q))
                }
            };
            let a = match j {
                Some(j) => *grid.att(j)?,
                None => crate::adversary::AttackVector::zero(),
            };
            let outcome = env.step(&w, &a, rng)?;
            let tr = Transition {
                u_av: outcome.u_av,
                u_att: outcome.u_att,
                regret: outcome.regret,
                abs_deviation: outcome.delta.abs(),
                spacing_dev: outcome.spacing_dev,
                terminal: outcome.collision,
                record: CarFollowingStep { w: *w.as_array(), a: *a.as_array(), outcome },
            };
            regret += tr.regret;
            dev += tr.abs_deviation;
            spacing += tr.spacing_dev;
            n += 1;
            history.total_steps += 1;
            on_step(episode, step, &tr)?;
            if tr.terminal {
                terminated = true;
                break;
            }
        }
        let k = n.max(1) as f64;
        history.episodes.push(EpisodeStats {
            episode,
            steps: n,
            eps: 0.0,
            mean_regret: regret / k,
            mean_abs_deviation: dev / k,
            mean_spacing_dev: spacing / k,
            terminated,
            av_loss: None,
            att_loss: None,
        });
    }
    Ok(history)
}

/// Expected per-step growth of δ under a constant beacon push of `tau`
/// against weight `w_beacon`: `w_beacon·τ·Σ_{l=0}^{n̄} q^l`.
pub fn beacon_drift_rate(w_beacon: f64, tau: f64, q: f64, depth: usize) -> f64 {
    let geo: f64 = (0..=depth).map(|l| q.powi(l as i32)).sum();
    w_beacon * tau * geo
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{AttackScenario, ScenarioKind, DEFAULT_THRESHOLDS};
    use crate::dynamics::FollowConfig;
    use crate::env::LeaderProcess;
    use crate::fusion::{MeasurementJacobian, NoiseModel, Sensor};
    use crate::rng::{stream, Stream};

    fn cfg(kind: ScenarioKind, noise: NoiseModel) -> EnvConfig {
        EnvConfig {
            follow: FollowConfig::default(),
            noise,
            jacobian: MeasurementJacobian::direct(),
            scenario: AttackScenario::from_kind(kind, DEFAULT_THRESHOLDS).unwrap(),
            leader: LeaderProcess::default(),
        }
    }

    #[test]
    fn noiseless_idle_run_has_zero_deviation() {
        // With zero noise the inverse-variance rule is one-hot on the first sensor.
        let c = cfg(ScenarioKind::None, NoiseModel::noiseless());
        let grid = ActionGrid::new(4, 5, &c.scenario).unwrap();
        let mut rng = stream(1, Stream::Environment);
        let h = kalman_static_run(&c, &grid, BaselineAttacker::WorstGrid, 1, 500, &mut rng, |_, _, tr| {
            assert_eq!(tr.record.outcome.delta, 0.0);
            Ok(())
        })
        .unwrap();
        assert_eq!(h.total_steps, 500);
    }

    #[test]
    fn worst_case_beacon_attack_drifts_linearly() {
        let c = cfg(ScenarioKind::BeaconOnly, NoiseModel::default());
        let grid = ActionGrid::new(4, 5, &c.scenario).unwrap();
        let w_b = inverse_variance_weights(&c.noise).get(Sensor::Beacon);
        let rate = beacon_drift_rate(w_b, 1.0, c.follow.decay(), c.follow.history_depth);
        let mut deltas = Vec::new();
        let mut rng = stream(2, Stream::Environment);
        kalman_static_run(&c, &grid, BaselineAttacker::WorstGrid, 1, 1000, &mut rng, |_, _, tr| {
            deltas.push(tr.record.outcome.delta);
            Ok(())
        })
        .unwrap();
        // Least-squares slope of |δ| over the post-transient window.
        let pts: Vec<(f64, f64)> = (200..1000).map(|n| (n as f64, deltas[n].abs())).collect();
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((slope - rate).abs() <= 0.02 * rate, "slope {slope} vs analytic {rate}");
    }

    #[test]
    fn frozen_attacker_must_match_grid() {
        let c = cfg(ScenarioKind::BeaconOnly, NoiseModel::default());
        let grid = ActionGrid::new(4, 5, &c.scenario).unwrap();
        let net = LstmQNet::zeros(5, 4, 3);
        let mut rng = stream(3, Stream::Environment);
        assert!(kalman_static_run(&c, &grid, BaselineAttacker::Frozen(&net), 1, 10, &mut rng, |_, _, _| Ok(())).is_err());
        let net = LstmQNet::zeros(5, 4, 5);
        // Zero network: all ties, index 0 is the full negative push.
        kalman_static_run(&c, &grid, BaselineAttacker::Frozen(&net), 1, 10, &mut rng, |_, _, tr| {
            assert_eq!(tr.record.a, [0.0, 0.0, -1.0, 0.0]);
            Ok(())
        })
        .unwrap();
    }
}
