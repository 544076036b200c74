//! Four-sensor measurement model and fusion estimators.
//!
//! Every sensor reads the leader speed directly (`z = H·v + e`, with `H`
//! defaulting to ones), so weighted least squares with a diagonal weight
//! matrix reduces to a weighted average of the readings.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt;

pub const SENSOR_COUNT: usize = 4;

/// Sensor slots in measurement order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sensor {
    Camera = 0,
    Radar = 1,
    Beacon = 2,
    Rss = 3,
}

impl Sensor {
    pub const ALL: [Sensor; SENSOR_COUNT] = [Sensor::Camera, Sensor::Radar, Sensor::Beacon, Sensor::Rss];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Sensor::Camera => "camera",
            Sensor::Radar => "radar",
            Sensor::Beacon => "beacon",
            Sensor::Rss => "rss",
        }
    }

    pub fn from_index(i: usize) -> Sensor {
        Self::ALL[i]
    }
}

impl fmt::Display for Sensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One reading per sensor (m/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorVector(pub [f64; SENSOR_COUNT]);

impl SensorVector {
    pub fn splat(v: f64) -> Self {
        Self([v; SENSOR_COUNT])
    }

    pub fn get(&self, s: Sensor) -> f64 {
        self.0[s.index()]
    }
}

/// Per-sensor Gaussian noise levels (m/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: [f64; SENSOR_COUNT],
}

impl NoiseModel {
    pub fn new(sigma: [f64; SENSOR_COUNT]) -> Result<Self> {
        if sigma.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::config("sigma", format!("noise levels must be finite and nonnegative, got {sigma:?}")));
        }
        let [camera, radar, beacon, rss] = sigma;
        if !(rss >= radar && radar >= camera && camera >= beacon) {
            log::warn!("noise profile {sigma:?} is not ordered rss >= radar >= camera >= beacon");
        }
        Ok(Self { sigma })
    }

    pub fn noiseless() -> Self {
        Self { sigma: [0.0; SENSOR_COUNT] }
    }

    /// Variance of the fused error `w·e`.
    pub fn fused_variance(&self, w: &WeightVector) -> f64 {
        w.0.iter().zip(&self.sigma).map(|(wk, s)| wk * wk * s * s).sum()
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { sigma: [0.2, 0.4, 0.05, 0.8] }
    }
}

/// Fusion weights on the probability simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightVector([f64; SENSOR_COUNT]);

impl WeightVector {
    pub const SUM_TOL: f64 = 1e-9;

    pub fn new(w: [f64; SENSOR_COUNT]) -> Result<Self> {
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Contract(format!("weights must be finite and nonnegative, got {w:?}")));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOL {
            return Err(Error::Contract(format!("weights must sum to 1, got {sum}")));
        }
        Ok(Self(w))
    }

    pub fn uniform() -> Self {
        Self([0.25; SENSOR_COUNT])
    }

    pub fn one_hot(s: Sensor) -> Self {
        let mut w = [0.0; SENSOR_COUNT];
        w[s.index()] = 1.0;
        Self(w)
    }

    pub fn as_array(&self) -> &[f64; SENSOR_COUNT] {
        &self.0
    }

    pub fn get(&self, s: Sensor) -> f64 {
        self.0[s.index()]
    }

    pub fn dot(&self, v: &[f64; SENSOR_COUNT]) -> f64 {
        self.0.iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

/// Measurement Jacobian of the scalar speed (4×1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementJacobian(pub [f64; SENSOR_COUNT]);

impl MeasurementJacobian {
    pub fn direct() -> Self {
        Self([1.0; SENSOR_COUNT])
    }
}

impl Default for MeasurementJacobian {
    fn default() -> Self {
        Self::direct()
    }
}

/// Draws one reading per sensor: `z_k = h_k·v_lead + σ_k·ξ_k`.
///
/// Consumes exactly four standard-normal draws, in sensor order, whatever
/// the noise levels are.
pub fn measure<R: Rng + ?Sized>(v_lead: f64, h: &MeasurementJacobian, noise: &NoiseModel, rng: &mut R) -> SensorVector {
    let mut z = [0.0; SENSOR_COUNT];
    for k in 0..SENSOR_COUNT {
        let xi: f64 = rng.sample(StandardNormal);
        z[k] = h.0[k] * v_lead + noise.sigma[k] * xi;
    }
    SensorVector(z)
}

/// `(hᵀWh)⁻¹ hᵀWz` for a diagonal positive `W`.
pub fn wls_estimate(z: &SensorVector, h: &MeasurementJacobian, w_diag: &[f64; SENSOR_COUNT]) -> Result<f64> {
    if w_diag.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::Contract(format!("WLS weights must be positive, got {w_diag:?}")));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..SENSOR_COUNT {
        num += h.0[k] * w_diag[k] * z.0[k];
        den += h.0[k] * w_diag[k] * h.0[k];
    }
    if den == 0.0 || !den.is_finite() {
        return Err(Error::Contract("measurement Jacobian is degenerate (hᵀWh = 0)".into()));
    }
    Ok(num / den)
}

/// Weighted average `wᵀz`.
pub fn fused_estimate(z: &SensorVector, w: &WeightVector) -> f64 {
    w.dot(&z.0)
}

/// `(z − ẑ)ᵀ W (z − ẑ)` for diagonal `W`.
pub fn residual_cost(z: &SensorVector, z_hat: &SensorVector, w_diag: &[f64; SENSOR_COUNT]) -> f64 {
    (0..SENSOR_COUNT)
        .map(|k| {
            let r = z.0[k] - z_hat.0[k];
            r * w_diag[k] * r
        })
        .sum()
}

/// Static weights proportional to `1/σ²`.
///
/// A zero-variance sensor takes all the weight (the first one, if several).
pub fn inverse_variance_weights(noise: &NoiseModel) -> WeightVector {
    if let Some(k) = noise.sigma.iter().position(|s| *s == 0.0) {
        return WeightVector::one_hot(Sensor::from_index(k));
    }
    let inv: Vec<f64> = noise.sigma.iter().map(|s| 1.0 / (s * s)).collect();
    let total: f64 = inv.iter().sum();
    let mut w = [0.0; SENSOR_COUNT];
    for k in 0..SENSOR_COUNT {
        w[k] = inv[k] / total;
    }
    WeightVector(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use rand::Rng;

    #[test]
    fn noiseless_measurement_is_exact() {
        let mut rng = stream(1, Stream::Environment);
        let z = measure(20.0, &MeasurementJacobian::direct(), &NoiseModel::noiseless(), &mut rng);
        assert_eq!(z, SensorVector::splat(20.0));
    }

    #[test]
    fn measurement_is_reproducible() {
        let noise = NoiseModel::default();
        let h = MeasurementJacobian::direct();
        let a = measure(20.0, &h, &noise, &mut stream(9, Stream::Environment));
        let b = measure(20.0, &h, &noise, &mut stream(9, Stream::Environment));
        assert_eq!(a, b);
    }

    #[test]
    fn beacon_sample_mean_is_unbiased() {
        let noise = NoiseModel::default();
        let h = MeasurementJacobian::direct();
        let mut rng = stream(3, Stream::Environment);
        let n = 100_000;
        let mean = (0..n).map(|_| measure(20.0, &h, &noise, &mut rng).get(Sensor::Beacon)).sum::<f64>() / n as f64;
        let se = noise.sigma[Sensor::Beacon.index()] / (n as f64).sqrt();
        assert!((mean - 20.0).abs() <= 3.0 * se, "mean {mean}");
    }

    #[test]
    fn wls_special_cases() {
        let z = SensorVector([1.0, 2.0, 3.0, 6.0]);
        let h = MeasurementJacobian::direct();
        assert!((wls_estimate(&z, &h, &[1.0; 4]).unwrap() - 3.0).abs() < 1e-12);
        let one_hot = [1e-300, 1e-300, 1.0, 1e-300];
        assert!((wls_estimate(&z, &h, &one_hot).unwrap() - 3.0).abs() < 1e-12);
        assert!(wls_estimate(&z, &MeasurementJacobian([0.0; 4]), &[1.0; 4]).is_err());
        assert!(wls_estimate(&z, &h, &[1.0, 0.0, 1.0, 1.0]).is_err());
    }

    fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let a = hi - phi * (hi - lo);
            let b = lo + phi * (hi - lo);
            if f(a) < f(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn wls_minimizes_residual_cost() {
        let mut rng = stream(11, Stream::Init);
        for _ in 0..50 {
            let z = SensorVector(std::array::from_fn(|_| rng.random_range(-10.0..10.0)));
            let h = MeasurementJacobian(std::array::from_fn(|_| rng.random_range(0.2..2.0)));
            let w: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.1..3.0));
            let est = wls_estimate(&z, &h, &w).unwrap();
            let cost = |v: f64| residual_cost(&z, &SensorVector(std::array::from_fn(|k| h.0[k] * v)), &w);
            let numeric = golden_section(cost, -100.0, 100.0);
            assert!((est - numeric).abs() < 1e-6, "{est} vs {numeric}");
            for _ in 0..1000 {
                let probe = est + rng.random_range(-5.0..5.0);
                assert!(cost(est) <= cost(probe) + 1e-12);
            }
        }
    }

    #[test]
    fn fused_estimate_examples() {
        let z = SensorVector([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(fused_estimate(&z, &WeightVector::one_hot(Sensor::Beacon)), 3.0);
        assert!((fused_estimate(&z, &WeightVector::uniform()) - 2.5).abs() < 1e-15);
        assert!(WeightVector::new([0.5, 0.5, 0.5, -0.5]).is_err());
        assert!(WeightVector::new([0.5, 0.5, 0.5, 0.0]).is_err());
    }

    #[test]
    fn fused_matches_wls_with_unit_jacobian() {
        let mut rng = stream(12, Stream::Init);
        for _ in 0..200 {
            let raw: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.01..1.0));
            let s: f64 = raw.iter().sum();
            let w = WeightVector::new(raw.map(|x| x / s)).unwrap();
            let z = SensorVector(std::array::from_fn(|_| rng.random_range(0.0..40.0)));
            let wls = wls_estimate(&z, &MeasurementJacobian::direct(), w.as_array()).unwrap();
            assert!((fused_estimate(&z, &w) - wls).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_cost_examples() {
        let z = SensorVector([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(residual_cost(&z, &z, &[1.0; 4]), 0.0);
        assert_eq!(residual_cost(&SensorVector([1.0, 0.0, 0.0, 0.0]), &SensorVector::splat(0.0), &[1.0; 4]), 1.0);
    }

    #[test]
    fn inverse_variance_examples() {
        let eq = inverse_variance_weights(&NoiseModel { sigma: [0.3; 4] });
        for k in 0..4 {
            assert!((eq.as_array()[k] - 0.25).abs() < 1e-15);
        }
        // 1/σ² = (25, 6.25, 400, 1.5625), total 432.8125.
        let w = inverse_variance_weights(&NoiseModel::default());
        let expected = [25.0 / 432.8125, 6.25 / 432.8125, 400.0 / 432.8125, 1.5625 / 432.8125];
        for k in 0..4 {
            assert!((w.as_array()[k] - expected[k]).abs() < 1e-12, "{:?}", w);
        }
        let degenerate = inverse_variance_weights(&NoiseModel { sigma: [0.2, 0.0, 0.0, 0.8] });
        assert_eq!(degenerate, WeightVector::one_hot(Sensor::Radar));
    }

    #[test]
    fn inverse_variance_minimizes_fused_variance() {
        let noise = NoiseModel::default();
        let best = noise.fused_variance(&inverse_variance_weights(&noise));
        let mut rng = stream(13, Stream::Init);
        for _ in 0..1000 {
            let raw: [f64; 4] = std::array::from_fn(|_| -rng.random::<f64>().ln());
            let s: f64 = raw.iter().sum();
            let w = WeightVector::new(raw.map(|x| x / s)).unwrap();
            assert!(best <= noise.fused_variance(&w) + 1e-15);
        }
    }

    #[test]
    fn fused_error_variance_by_monte_carlo() {
        let noise = NoiseModel::default();
        let w = WeightVector::uniform();
        let h = MeasurementJacobian::direct();
        let mut rng = stream(14, Stream::Environment);
        let n = 100_000;
        let errs: Vec<f64> = (0..n).map(|_| fused_estimate(&measure(0.0, &h, &noise, &mut rng), &w)).collect();
        let var = errs.iter().map(|e| e * e).sum::<f64>() / n as f64;
        let truth = noise.fused_variance(&w);
        // Standard error of a Gaussian sample variance.
        let se = truth * (2.0 / n as f64).sqrt();
        assert!((var - truth).abs() <= 3.0 * se, "{var} vs {truth}");
    }
}
