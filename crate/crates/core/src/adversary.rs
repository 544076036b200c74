//! Bounded false-data injection.

use crate::error::{Error, Result};
use crate::fusion::{fused_estimate, Sensor, SensorVector, WeightVector, SENSOR_COUNT};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Per-sensor injection thresholds (m/s): camera, radar, beacon, RSS.
pub const DEFAULT_THRESHOLDS: [f64; SENSOR_COUNT] = [0.5, 1.0, 1.0, 1.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    None,
    BeaconOnly,
    All,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::None => "none",
            ScenarioKind::BeaconOnly => "beacon",
            ScenarioKind::All => "all",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ScenarioKind::None),
            "beacon" | "beacon_only" => Ok(ScenarioKind::BeaconOnly),
            "all" => Ok(ScenarioKind::All),
            other => Err(Error::config("scenario", format!("expected none, beacon or all, got {other:?}"))),
        }
    }
}

/// Which sensors the attacker reaches, and how far.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackScenario {
    pub mask: [bool; SENSOR_COUNT],
    pub tau: [f64; SENSOR_COUNT],
}

impl AttackScenario {
    pub fn new(mask: [bool; SENSOR_COUNT], tau: [f64; SENSOR_COUNT]) -> Result<Self> {
        if tau.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::config("tau", format!("thresholds must be finite and nonnegative, got {tau:?}")));
        }
        Ok(Self { mask, tau })
    }

    pub fn from_kind(kind: ScenarioKind, tau: [f64; SENSOR_COUNT]) -> Result<Self> {
        let mask = match kind {
            ScenarioKind::None => [false; SENSOR_COUNT],
            ScenarioKind::BeaconOnly => {
                let mut m = [false; SENSOR_COUNT];
                m[Sensor::Beacon.index()] = true;
                m
            }
            ScenarioKind::All => [true; SENSOR_COUNT],
        };
        Self::new(mask, tau)
    }

    pub fn attackable(&self) -> impl Iterator<Item = Sensor> + '_ {
        Sensor::ALL.into_iter().filter(|s| self.mask[s.index()])
    }

    /// Checks (strict) or projects (clamp) a raw injection onto the feasible box.
    pub fn validate(&self, raw: [f64; SENSOR_COUNT], mode: ValidationMode) -> Result<AttackVector> {
        let mut a = [0.0; SENSOR_COUNT];
        for s in Sensor::ALL {
            let k = s.index();
            let value = raw[k];
            if !value.is_finite() {
                return Err(Error::Contract(format!("non-finite injection on {s}")));
            }
            if !self.mask[k] {
                if value != 0.0 && mode == ValidationMode::Strict {
                    return Err(Error::MaskViolation { sensor: s.name() });
                }
                continue;
            }
            let tau = self.tau[k];
            a[k] = if value.abs() <= tau {
                value
            } else if mode == ValidationMode::Strict {
                return Err(Error::ThresholdViolation { sensor: s.name(), value, tau });
            } else {
                value.clamp(-tau, tau)
            };
        }
        Ok(AttackVector(a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ValidationMode {
    #[default]
    Strict,
    Clamp,
}

/// A feasible injection; only [`AttackScenario::validate`] builds nonzero ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackVector([f64; SENSOR_COUNT]);

impl AttackVector {
    pub fn zero() -> Self {
        Self([0.0; SENSOR_COUNT])
    }

    pub fn as_array(&self) -> &[f64; SENSOR_COUNT] {
        &self.0
    }

    pub fn negated(&self) -> Self {
        Self(self.0.map(|x| -x))
    }
}

/// `z̃ = z + a`.
pub fn apply_attack(z: &SensorVector, a: &AttackVector) -> SensorVector {
    SensorVector(std::array::from_fn(|k| z.0[k] + a.0[k]))
}

/// Fused speed estimate from attacked readings, `wᵀ(z + a)`.
pub fn attacked_estimate(z: &SensorVector, a: &AttackVector, w: &WeightVector) -> f64 {
    fused_estimate(&apply_attack(z, a), w)
}
