//! Finite action sets for both players.

use crate::adversary::{AttackScenario, AttackVector, ValidationMode};
use crate::error::{Error, Result};
use crate::fusion::{WeightVector, SENSOR_COUNT};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionGrid {
    av: Vec<WeightVector>,
    att: Vec<AttackVector>,
}

impl ActionGrid {
    /// Simplex lattice with step `1/weight_divisions` for the follower, and
    /// `attack_levels` evenly spaced levels in `[−τ_k, τ_k]` per attacked sensor.
    pub fn new(weight_divisions: usize, attack_levels: usize, scenario: &AttackScenario) -> Result<Self> {
        if weight_divisions == 0 {
            return Err(Error::config("weight_divisions", "must be at least 1"));
        }
        if attack_levels == 0 {
            return Err(Error::config("attack_levels", "must be at least 1"));
        }
        let av = simplex_lattice(weight_divisions)?;
        let levels = |tau: f64| -> Vec<f64> {
            if attack_levels == 1 {
                return vec![0.0];
            }
            let mut out: Vec<f64> = (0..attack_levels)
                .map(|i| tau * (2.0 * i as f64 / (attack_levels - 1) as f64 - 1.0) + 0.0)
                .collect();
            out.dedup();
            out
        };
        let mut raw: Vec<[f64; SENSOR_COUNT]> = vec![[0.0; SENSOR_COUNT]];
        for s in scenario.attackable() {
            let k = s.index();
            let lv = levels(scenario.tau[k]);
            raw = raw
                .iter()
                .flat_map(|prefix| {
                    lv.iter().map(move |&x| {
                        let mut a = *prefix;
                        a[k] = x;
                        a
                    })
                })
                .collect();
        }
        // A zero threshold collapses its levels; keep first occurrence only.
        let mut att: Vec<AttackVector> = Vec::with_capacity(raw.len());
        for a in raw {
            let v = scenario.validate(a, ValidationMode::Strict)?;
            if !att.contains(&v) {
                att.push(v);
            }
        }
        Ok(Self { av, att })
    }

    /// Grids from explicit action lists, validated against `scenario`.
    pub fn from_actions(av: Vec<WeightVector>, att: Vec<[f64; SENSOR_COUNT]>, scenario: &AttackScenario) -> Result<Self> {
        if av.is_empty() || att.is_empty() {
            return Err(Error::config("grid", "action sets must be nonempty"));
        }
        let att = att
            .into_iter()
            .map(|a| scenario.validate(a, ValidationMode::Strict))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { av, att })
    }

    pub fn av_actions(&self) -> &[WeightVector] {
        &self.av
    }

    pub fn att_actions(&self) -> &[AttackVector] {
        &self.att
    }

    pub fn av(&self, index: usize) -> Result<&WeightVector> {
        self.av.get(index).ok_or_else(|| Error::Contract(format!("AV action {index} outside grid of {}", self.av.len())))
    }

    pub fn att(&self, index: usize) -> Result<&AttackVector> {
        self.att
            .get(index)
            .ok_or_else(|| Error::Contract(format!("attacker action {index} outside grid of {}", self.att.len())))
    }
}

/// All `w = k/r` with nonnegative integer `k` summing to `r`, in
/// lexicographic order of `k`.
pub fn simplex_lattice(r: usize) -> Result<Vec<WeightVector>> {
    let mut out = Vec::new();
    let rf = r as f64;
    for k0 in 0..=r {
        for k1 in 0..=r - k0 {
            for k2 in 0..=r - k0 - k1 {
                let k3 = r - k0 - k1 - k2;
                out.push(WeightVector::new([k0 as f64 / rf, k1 as f64 / rf, k2 as f64 / rf, k3 as f64 / rf])?);
            }
        }
    }
    Ok(out)
}
