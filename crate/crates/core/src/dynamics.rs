//! Discrete-time car-following kinematics.
//!
//! The follower tracks its (estimated) leader speed with a first-order
//! lag, `v(n+1) = λT·v̂(n) + (1 − λT)·v(n)`, and the spacing integrates the
//! speed difference. With `q = 1 − λT`, the influence of an estimate `l`
//! steps old decays as `q^l`; [`history_depth`] is the number of steps
//! after which that influence drops below a tolerance.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Dynamics constants shared by every component of the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FollowConfig {
    /// Reaction rate λ (1/s).
    pub lambda: f64,
    /// Sampling period T (s).
    pub period: f64,
    /// Truncation tolerance for the speed history, in (0, 1).
    pub eps_tol: f64,
    /// History depth n̄ derived from (λ, T, eps_tol).
    pub history_depth: usize,
    /// Standstill spacing of the safe-spacing policy (m).
    pub d_min: f64,
    /// Time headway of the safe-spacing policy (s).
    pub headway: f64,
    /// Maximum allowable speed (m/s).
    pub v_max: f64,
}

impl FollowConfig {
    pub fn new(lambda: f64, period: f64, eps_tol: f64, d_min: f64, headway: f64, v_max: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::config("period", format!("must be positive, got {period}")));
        }
        if !(d_min >= 0.0 && d_min.is_finite()) {
            return Err(Error::config("d_min", format!("must be nonnegative, got {d_min}")));
        }
        if !(headway > 0.0 && headway.is_finite()) {
            return Err(Error::config("headway", format!("must be positive, got {headway}")));
        }
        if !(v_max > 0.0 && v_max.is_finite()) {
            return Err(Error::config("v_max", format!("must be positive, got {v_max}")));
        }
        let history_depth = history_depth(lambda, period, eps_tol)?;
        Ok(Self { lambda, period, eps_tol, history_depth, d_min, headway, v_max })
    }

    /// λT, the per-step tracking gain.
    pub fn gain(&self) -> f64 {
        self.lambda * self.period
    }

    /// 1 − λT, the per-step memory factor.
    pub fn decay(&self) -> f64 {
        1.0 - self.lambda * self.period
    }

    /// Conversion from accumulated deviation to spacing error in meters (λT²).
    pub fn spacing_per_deviation(&self) -> f64 {
        self.lambda * self.period * self.period
    }
}

impl Default for FollowConfig {
    fn default() -> Self {
        Self::new(1.0, 0.1, 1e-3, 2.0, 1.5, 40.0).expect("default dynamics are valid")
    }
}

/// Follower and leader kinematic state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub v: f64,
    pub v_lead: f64,
    /// Spacing to the leader (m); non-positive means collision.
    pub d: f64,
    pub n: usize,
}

/// Smallest `n ≥ 1` with `|1 − λT|^n ≤ eps_tol`.
///
/// Returns 1 when λT = 1, since then only the newest estimate carries weight.
pub fn history_depth(lambda: f64, period: f64, eps_tol: f64) -> Result<usize> {
    let gain = lambda * period;
    if !(gain > 0.0 && gain < 2.0) {
        return Err(Error::config("lambda", format!("stability requires 0 < lambda*T < 2, got {gain}")));
    }
    if !(eps_tol > 0.0 && eps_tol < 1.0) {
        return Err(Error::config("eps_tol", format!("must lie in (0, 1), got {eps_tol}")));
    }
    let q = (1.0 - gain).abs();
    if q == 0.0 {
        return Ok(1);
    }
    // Closed form first, then settle floating-point edge cases by direct test.
    let mut n = (eps_tol.ln() / q.ln()).ceil().max(1.0) as usize;
    while n > 1 && q.powi(n as i32 - 1) <= eps_tol {
        n -= 1;
    }
    while q.powi(n as i32) > eps_tol {
        n += 1;
    }
    Ok(n)
}

/// Unclamped first-order tracking step.
pub fn raw_speed_update(v: f64, v_lead_est: f64, cfg: &FollowConfig) -> f64 {
    cfg.gain() * v_lead_est + cfg.decay() * v
}

/// One tracking step, clamped to `[0, v_max]`.
pub fn discrete_speed_update(v: f64, v_lead_est: f64, cfg: &FollowConfig) -> f64 {
    raw_speed_update(v, v_lead_est, cfg).clamp(0.0, cfg.v_max)
}

/// Truncated convolution form of the speed recursion.
///
/// `est_history` holds the newest `n̄ + 1` speed estimates, newest first.
pub fn truncated_speed(est_history: &[f64], cfg: &FollowConfig) -> Result<f64> {
    let expected = cfg.history_depth + 1;
    if est_history.len() != expected {
        return Err(Error::Contract(format!(
            "speed history must hold {expected} entries, got {}",
            est_history.len()
        )));
    }
    let q = cfg.decay();
    let mut weight = cfg.gain();
    let mut acc = 0.0;
    for est in est_history {
        acc += weight * est;
        weight *= q;
    }
    Ok(acc)
}

pub fn spacing_update(d: f64, v_lead_next: f64, v_next: f64, period: f64) -> f64 {
    d + period * (v_lead_next - v_next)
}

/// Constant-time-headway safe spacing `d_min + t_h·ν`.
pub fn safe_spacing(nu: f64, cfg: &FollowConfig) -> f64 {
    cfg.d_min + cfg.headway * nu
}

/// Spacing at which a follower starting from rest must begin tracking a
/// leader cruising at `nu` so that the gap settles on [`safe_spacing`].
///
/// From rest the follower's speed is `ν(1 − q^m)`, so the spacing grows by
/// `Tν·Σ_{p=1}^{n̄} q^p` over the history depth; the remainder beyond n̄ is
/// below `ν·q^{n̄+1}/λ`. A negative result is returned but logged, since it
/// means the leader is too fast for the requested headway.
pub fn initial_spacing(nu: f64, cfg: &FollowConfig) -> f64 {
    let q = cfg.decay();
    let mut lag = 0.0;
    let mut qp = 1.0;
    for _ in 1..=cfg.history_depth {
        qp *= q;
        lag += qp;
    }
    let d = safe_spacing(nu, cfg) - cfg.period * nu * lag;
    if d < 0.0 {
        log::warn!("initial spacing {d:.3} m is negative for nu = {nu} m/s; warm start is infeasible");
    }
    d
}
