//! Flat `key=value` experiment configuration.
//!
//! A config file holds one `key = value` pair per line; `#` starts a
//! comment. Unknown keys are rejected, later assignments override earlier
//! ones, and command-line overrides are applied last. [`KEYS`] lists every
//! key with its default in canonical order; `config.lock` echoes the
//! resolved values in the same order.

use crate::error::{CliError, Result};
use afsim_core::adversary::{AttackScenario, ScenarioKind, DEFAULT_THRESHOLDS};
use afsim_core::dynamics::FollowConfig;
use afsim_core::env::{EnvConfig, LeaderProcess};
use afsim_core::fusion::{MeasurementJacobian, NoiseModel, SENSOR_COUNT};
use afsim_core::rl::{ActionGrid, Exploration, LearnerConfig, OptimizerKind, PlateauRule, SelfPlayConfig, UtilityShaping};
use sha2::{Digest, Sha256};
use std::path::Path;
use std::str::FromStr;

/// Every accepted key with its default value, in canonical order.
pub const KEYS: &[(&str, &str)] = &[
    ("scenario", "beacon"),
    ("seed", "1"),
    ("lambda", "1"),
    ("period", "0.1"),
    ("eps_tol", "0.001"),
    ("d_min", "2"),
    ("headway", "1.5"),
    ("v_max", "40"),
    ("nu", "20"),
    ("sigma_lead", "0"),
    ("sigma", "0.2,0.4,0.05,0.8"),
    ("tau", "0.5,1,1,1.5"),
    ("episodes", "40"),
    ("steps", "1000"),
    ("weight_divisions", "4"),
    ("attack_levels", "5"),
    ("hidden", "32"),
    ("init_scale", "1"),
    ("optimizer", "adam"),
    ("beta", "0.001"),
    ("gamma", "0.95"),
    ("batch", "1"),
    ("replay", "10000"),
    ("grad_clip", "10"),
    ("target_sync", "0"),
    ("terminal_cutoff", "false"),
    ("eps_start", "1"),
    ("eps_end", "0.05"),
    ("eps_decay", "0.9"),
    ("utility_shaping", "increment"),
    ("utility_scale", "1"),
    ("train_every", "1"),
    ("plateau_window", "50"),
    ("plateau_span", "100"),
    ("plateau_tol", "0.01"),
    ("steady_from", "0.5"),
    ("baseline_attacker", "worst"),
    ("fp_iterations", "10000"),
];

/// Resolved experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioKind,
    pub seed: u64,
    pub lambda: f64,
    pub period: f64,
    pub eps_tol: f64,
    pub d_min: f64,
    pub headway: f64,
    pub v_max: f64,
    pub nu: f64,
    pub sigma_lead: f64,
    /// Camera, radar, beacon, roadside sensor.
    pub sigma: [f64; SENSOR_COUNT],
    pub tau: [f64; SENSOR_COUNT],
    pub episodes: usize,
    pub steps: usize,
    pub weight_divisions: usize,
    pub attack_levels: usize,
    pub hidden: usize,
    pub init_scale: f64,
    pub optimizer: OptimizerKind,
    pub beta: f64,
    pub gamma: f64,
    pub batch: usize,
    pub replay: usize,
    pub grad_clip: f64,
    pub target_sync: usize,
    pub terminal_cutoff: bool,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_decay: f64,
    pub utility_shaping: UtilityShaping,
    pub utility_scale: f64,
    pub train_every: usize,
    /// A zero window disables the plateau stop.
    pub plateau_window: usize,
    pub plateau_span: usize,
    pub plateau_tol: f64,
    /// Fraction of each episode after which the steady window starts.
    pub steady_from: f64,
    /// `worst`, `idle`, or a checkpoint path whose attacker network is replayed.
    pub baseline_attacker: String,
    pub fp_iterations: usize,
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| CliError::config(key, format!("cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::config(key, format!("expected true or false, got {value:?}"))),
    }
}

fn parse_quad(key: &str, value: &str) -> Result<[f64; SENSOR_COUNT]> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != SENSOR_COUNT {
        return Err(CliError::config(key, format!("expected {SENSOR_COUNT} comma-separated values (camera, radar, beacon, rss), got {value:?}")));
    }
    let mut out = [0.0; SENSOR_COUNT];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = parse_num(key, p)?;
    }
    Ok(out)
}

fn quad(v: &[f64; SENSOR_COUNT]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

/// Splits `key=value`, trimming both sides.
pub fn split_assignment(s: &str) -> Option<(&str, &str)> {
    let (k, v) = s.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    (!k.is_empty()).then_some((k, v))
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut cfg = ExperimentConfig {
            scenario: ScenarioKind::BeaconOnly,
            seed: 0,
            lambda: 0.0,
            period: 0.0,
            eps_tol: 0.0,
            d_min: 0.0,
            headway: 0.0,
            v_max: 0.0,
            nu: 0.0,
            sigma_lead: 0.0,
            sigma: [0.0; SENSOR_COUNT],
            tau: DEFAULT_THRESHOLDS,
            episodes: 0,
            steps: 0,
            weight_divisions: 0,
            attack_levels: 0,
            hidden: 0,
            init_scale: 0.0,
            optimizer: OptimizerKind::Adam,
            beta: 0.0,
            gamma: 0.0,
            batch: 0,
            replay: 0,
            grad_clip: 0.0,
            target_sync: 0,
            terminal_cutoff: false,
            eps_start: 0.0,
            eps_end: 0.0,
            eps_decay: 0.0,
            utility_shaping: UtilityShaping::Raw,
            utility_scale: 0.0,
            train_every: 0,
            plateau_window: 0,
            plateau_span: 0,
            plateau_tol: 0.0,
            steady_from: 0.0,
            baseline_attacker: String::new(),
            fp_iterations: 0,
        };
        for (k, v) in KEYS {
            cfg.set(k, v).expect("defaults parse");
        }
        cfg
    }
}

impl ExperimentConfig {
    /// Assigns one key; unknown keys and unparseable values are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "scenario" => self.scenario = value.parse()?,
            "seed" => self.seed = parse_num(key, value)?,
            "lambda" => self.lambda = parse_num(key, value)?,
            "period" => self.period = parse_num(key, value)?,
            "eps_tol" => self.eps_tol = parse_num(key, value)?,
            "d_min" => self.d_min = parse_num(key, value)?,
            "headway" => self.headway = parse_num(key, value)?,
            "v_max" => self.v_max = parse_num(key, value)?,
            "nu" => self.nu = parse_num(key, value)?,
            "sigma_lead" => self.sigma_lead = parse_num(key, value)?,
            "sigma" => self.sigma = parse_quad(key, value)?,
            "tau" => self.tau = parse_quad(key, value)?,
            "episodes" => self.episodes = parse_num(key, value)?,
            "steps" => self.steps = parse_num(key, value)?,
            "weight_divisions" => self.weight_divisions = parse_num(key, value)?,
            "attack_levels" => self.attack_levels = parse_num(key, value)?,
            "hidden" => self.hidden = parse_num(key, value)?,
            "init_scale" => self.init_scale = parse_num(key, value)?,
            "optimizer" => self.optimizer = value.parse()?,
            "beta" => self.beta = parse_num(key, value)?,
            "gamma" => self.gamma = parse_num(key, value)?,
            "batch" => self.batch = parse_num(key, value)?,
            "replay" => self.replay = parse_num(key, value)?,
            "grad_clip" => self.grad_clip = parse_num(key, value)?,
            "target_sync" => self.target_sync = parse_num(key, value)?,
            "terminal_cutoff" => self.terminal_cutoff = parse_bool(key, value)?,
            "eps_start" => self.eps_start = parse_num(key, value)?,
            "eps_end" => self.eps_end = parse_num(key, value)?,
            "eps_decay" => self.eps_decay = parse_num(key, value)?,
            "utility_shaping" => self.utility_shaping = value.parse()?,
            "utility_scale" => self.utility_scale = parse_num(key, value)?,
            "train_every" => self.train_every = parse_num(key, value)?,
            "plateau_window" => self.plateau_window = parse_num(key, value)?,
            "plateau_span" => self.plateau_span = parse_num(key, value)?,
            "plateau_tol" => self.plateau_tol = parse_num(key, value)?,
            "steady_from" => self.steady_from = parse_num(key, value)?,
            "baseline_attacker" => {
                if value.is_empty() {
                    return Err(CliError::config(key, "must not be empty"));
                }
                self.baseline_attacker = value.to_string()
            }
            "fp_iterations" => self.fp_iterations = parse_num(key, value)?,
            _ => return Err(CliError::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Applies the assignments of a config file on top of `self`.
    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = split_assignment(line).ok_or_else(|| CliError::parse(path, i as u64 + 1, format!("expected key=value, got {line:?}")))?;
            self.set(k, v).map_err(|e| CliError::parse(path, i as u64 + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, path)?;
        Ok(cfg)
    }

    /// Current value of every key, in [`KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let v = |key: &'static str, value: String| (key, value);
        vec![
            v("scenario", self.scenario.name().to_string()),
            v("seed", self.seed.to_string()),
            v("lambda", self.lambda.to_string()),
            v("period", self.period.to_string()),
            v("eps_tol", self.eps_tol.to_string()),
            v("d_min", self.d_min.to_string()),
            v("headway", self.headway.to_string()),
            v("v_max", self.v_max.to_string()),
            v("nu", self.nu.to_string()),
            v("sigma_lead", self.sigma_lead.to_string()),
            v("sigma", quad(&self.sigma)),
            v("tau", quad(&self.tau)),
            v("episodes", self.episodes.to_string()),
            v("steps", self.steps.to_string()),
            v("weight_divisions", self.weight_divisions.to_string()),
            v("attack_levels", self.attack_levels.to_string()),
            v("hidden", self.hidden.to_string()),
            v("init_scale", self.init_scale.to_string()),
            v("optimizer", self.optimizer.name().to_string()),
            v("beta", self.beta.to_string()),
            v("gamma", self.gamma.to_string()),
            v("batch", self.batch.to_string()),
            v("replay", self.replay.to_string()),
            v("grad_clip", self.grad_clip.to_string()),
            v("target_sync", self.target_sync.to_string()),
            v("terminal_cutoff", self.terminal_cutoff.to_string()),
            v("eps_start", self.eps_start.to_string()),
            v("eps_end", self.eps_end.to_string()),
            v("eps_decay", self.eps_decay.to_string()),
            v("utility_shaping", self.utility_shaping.name().to_string()),
            v("utility_scale", self.utility_scale.to_string()),
            v("train_every", self.train_every.to_string()),
            v("plateau_window", self.plateau_window.to_string()),
            v("plateau_span", self.plateau_span.to_string()),
            v("plateau_tol", self.plateau_tol.to_string()),
            v("steady_from", self.steady_from.to_string()),
            v("baseline_attacker", self.baseline_attacker.clone()),
            v("fp_iterations", self.fp_iterations.to_string()),
        ]
    }

    /// The `config.lock` text: one `key=value` line per key.
    pub fn lock_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// SHA-256 of [`lock_text`](Self::lock_text), hex encoded.
    pub fn hash(&self) -> String {
        hex_digest(self.lock_text().as_bytes())
    }

    pub fn env_config(&self) -> Result<EnvConfig> {
        let follow = FollowConfig::new(self.lambda, self.period, self.eps_tol, self.d_min, self.headway, self.v_max)?;
        let noise = NoiseModel::new(self.sigma)?;
        let scenario = AttackScenario::from_kind(self.scenario, self.tau)?;
        let cfg = EnvConfig {
            follow,
            noise,
            jacobian: MeasurementJacobian::direct(),
            scenario,
            leader: LeaderProcess { nu: self.nu, sigma_lead: self.sigma_lead },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<ActionGrid> {
        Ok(ActionGrid::new(self.weight_divisions, self.attack_levels, &self.env_config()?.scenario)?)
    }

    pub fn learner_config(&self) -> Result<LearnerConfig> {
        let cfg = LearnerConfig {
            hidden_dim: self.hidden,
            beta: self.beta,
            gamma: self.gamma,
            batch_size: self.batch,
            replay_capacity: self.replay,
            optimizer: self.optimizer,
            grad_clip: self.grad_clip,
            target_sync: self.target_sync,
            terminal_cutoff: self.terminal_cutoff,
            init_scale: self.init_scale,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn self_play_config(&self) -> Result<SelfPlayConfig> {
        let plateau = (self.plateau_window > 0).then_some(PlateauRule {
            window: self.plateau_window,
            span: self.plateau_span,
            tolerance: self.plateau_tol,
        });
        let cfg = SelfPlayConfig {
            episodes: self.episodes,
            steps_per_episode: self.steps,
            exploration: Exploration::Exponential { start: self.eps_start, end: self.eps_end, decay: self.eps_decay },
            utility_scale: self.utility_scale,
            shaping: self.utility_shaping,
            train_every: self.train_every,
            plateau,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// First step index of the steady window within an episode.
    pub fn steady_start(&self) -> usize {
        (self.steady_from * self.steps as f64).floor() as usize
    }

    /// Runs every module-level check, so a bad value fails before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.env_config()?;
        self.grid()?;
        self.learner_config()?;
        self.self_play_config()?;
        if !(0.0..1.0).contains(&self.steady_from) {
            return Err(CliError::config("steady_from", format!("must lie in [0, 1), got {}", self.steady_from)));
        }
        if self.plateau_window > 0 && !(self.plateau_tol >= 0.0 && self.plateau_tol.is_finite()) {
            return Err(CliError::config("plateau_tol", format!("must be nonnegative, got {}", self.plateau_tol)));
        }
        if self.fp_iterations == 0 {
            return Err(CliError::config("fp_iterations", "must be at least 1"));
        }
        Ok(())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_the_lock_text() {
        let cfg = ExperimentConfig::default();
        let listed: Vec<(&str, String)> = KEYS.iter().map(|(k, v)| (*k, v.to_string())).collect();
        assert_eq!(cfg.entries(), listed);
        let mut again = ExperimentConfig::default();
        again.apply_text(&cfg.lock_text(), Path::new("config.lock")).unwrap();
        assert_eq!(again, cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_key_reports_line() {
        let mut cfg = ExperimentConfig::default();
        let err = cfg.apply_text("seed = 3\n# comment\nbogus = 1\n", Path::new("x.cfg")).unwrap_err();
        assert!(matches!(err, CliError::Parse { line: 3, .. }), "{err}");
        assert_eq!(cfg.seed, 3);
    }

    #[test]
    fn values_are_checked() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.set("sigma", "0.1,0.2").is_err());
        assert!(cfg.set("terminal_cutoff", "maybe").is_err());
        cfg.set("gamma", "1.5").unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Config { .. })));
    }

    #[test]
    fn hash_tracks_every_key() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.set("beta", "0.002").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
