//! The `train`, `eval`, `baseline` and `oracle` subcommands.

use crate::checkpoint::CheckpointBody;
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::summary::{steady_mean_spacing_dev, StepRecord, Summary, WindowStats};
use crate::trace::{TraceRow, TraceWriter};
use afsim_core::fusion::{inverse_variance_weights, Sensor};
use afsim_core::oracle::{exact_msne_small, expected_payoff_matrix, fictitious_play, kalman_static_run, BaselineAttacker, MixedStrategy, PayoffMatrix};
use afsim_core::rl::{rollout, self_play, CarFollowingGame, Controller, QLearner, TwoPlayerGame, FEATURES_PER_STEP};
use afsim_core::rng::{stream, Stream};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Output directory plus the files every run writes.
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(RunDir { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, text).map_err(|e| CliError::io(&p, e))
    }

    fn write_lock(&self, cfg: &ExperimentConfig) -> Result<()> {
        self.write("config.lock", &cfg.lock_text())
    }

    /// Wall time lives in its own file so that summaries stay byte-identical.
    fn write_timing(&self, started: Instant) -> Result<()> {
        self.write("timing.txt", &format!("wall_time_s={:.3}\n", started.elapsed().as_secs_f64()))
    }
}

/// Lets trace I/O errors escape a core callback, which can only return core errors.
struct Sink {
    trace: TraceWriter,
    records: Vec<StepRecord>,
    io_error: Option<CliError>,
}

impl Sink {
    fn new(dir: &RunDir) -> Result<Self> {
        Ok(Sink { trace: TraceWriter::create(&dir.path("trace.csv"))?, records: Vec::new(), io_error: None })
    }

    fn push(&mut self, row: TraceRow) -> afsim_core::Result<()> {
        self.records.push(StepRecord::from(&row));
        if let Err(e) = self.trace.write(&row) {
            self.io_error = Some(e);
            return Err(afsim_core::Error::Contract("trace write failed".into()));
        }
        Ok(())
    }

    /// Prefers a captured I/O error over the sentinel it caused.
    fn check<T>(&mut self, r: afsim_core::Result<T>) -> Result<T> {
        match (self.io_error.take(), r) {
            (Some(e), _) => Err(e),
            (None, r) => Ok(r?),
        }
    }
}

fn episode_collisions(h: &afsim_core::rl::TrainingHistory) -> Vec<bool> {
    h.episodes.iter().map(|e| e.terminated).collect()
}

fn push_common(s: &mut Summary, cfg: &ExperimentConfig) {
    s.push("scenario", cfg.scenario.name());
    s.push("seed", cfg.seed);
    s.push("config_hash", cfg.hash());
}

/// Self-play training; writes trace, summary, checkpoint and lock files.
///
/// With `init_only` it writes the untrained checkpoint and stops.
pub fn train(cfg: &ExperimentConfig, out: &Path, init_only: bool) -> Result<()> {
    cfg.validate()?;
    let started = Instant::now();
    let dir = RunDir::create(out)?;
    dir.write_lock(cfg)?;
    let env_cfg = cfg.env_config()?;
    let grid = cfg.grid()?;
    let lc = cfg.learner_config()?;
    let mut game = CarFollowingGame::new(env_cfg, grid.clone(), stream(cfg.seed, Stream::Environment))?;
    let mut init = stream(cfg.seed, Stream::Init);
    let mut av = QLearner::new(FEATURES_PER_STEP, game.av_action_count(), lc, &mut init, stream(cfg.seed, Stream::AvLearner))?;
    let mut att = QLearner::new(FEATURES_PER_STEP, game.att_action_count(), lc, &mut init, stream(cfg.seed, Stream::AttackerLearner))?;
    if init_only {
        let ck = CheckpointBody::new(cfg.hash(), cfg.scenario.name().into(), 0, grid, av.net().clone(), att.net().clone());
        ck.save(&dir.path("checkpoint.json"))?;
        return dir.write_timing(started);
    }
    let sp = cfg.self_play_config()?;
    let mut sink = Sink::new(&dir)?;
    let res = self_play(&mut game, &mut av, &mut att, &sp, |ev| sink.push(TraceRow::from_step(ev.episode, ev.step, ev.eps, &ev.transition.record)));
    let history = sink.check(res)?;
    let rows = sink.trace.finish()?;
    let ck = CheckpointBody::new(cfg.hash(), cfg.scenario.name().into(), history.episodes.len(), grid, av.net().clone(), att.net().clone());
    ck.save(&dir.path("checkpoint.json"))?;

    let mut s = Summary::new("train");
    push_common(&mut s, cfg);
    s.push("episodes_run", history.episodes.len());
    s.push("steps_total", rows);
    s.push("converged_at", history.converged_at.map_or("none".to_string(), |e| e.to_string()));
    s.push("collisions", episode_collisions(&history).iter().filter(|&&c| c).count());
    WindowStats::of(&sink.records).push_to(&mut s);
    let w_iv = inverse_variance_weights(&env_cfg.noise);
    s.push("inverse_variance_w_beacon", w_iv.get(Sensor::Beacon));
    let last = history.episodes.len().saturating_sub(1);
    let last_rows: Vec<StepRecord> = sink.records.iter().filter(|r| r.episode == last).copied().collect();
    let last_collided = history.episodes.last().is_some_and(|e| e.terminated);
    s.push("final_episode_steady_mean_spacing_dev_m", steady_mean_spacing_dev(&last_rows, cfg.steady_start(), &[last_collided]));
    s.write(&dir.path("summary.txt"))?;
    write_episode_table(&dir, &history)?;
    dir.write_timing(started)
}

fn write_episode_table(dir: &RunDir, h: &afsim_core::rl::TrainingHistory) -> Result<()> {
    let mut t = String::from("episode,steps,eps_explore,mean_regret,mean_abs_delta,mean_spacing_dev_m,collision,av_loss,att_loss\n");
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    for e in &h.episodes {
        let _ = writeln!(
            t,
            "{},{},{},{},{},{},{},{},{}",
            e.episode,
            e.steps,
            e.eps,
            e.mean_regret,
            e.mean_abs_deviation,
            e.mean_spacing_dev,
            e.terminated,
            opt(e.av_loss),
            opt(e.att_loss)
        );
    }
    dir.write("episodes.csv", &t)
}

fn push_rollout_stats(s: &mut Summary, cfg: &ExperimentConfig, records: &[StepRecord], collided: &[bool]) {
    s.push("episodes_run", collided.len());
    s.push("steps_total", records.len());
    s.push("collisions", collided.iter().filter(|&&c| c).count());
    let mean = |f: &dyn Fn(&StepRecord) -> f64| if records.is_empty() { f64::NAN } else { records.iter().map(f).sum::<f64>() / records.len() as f64 };
    s.push("mean_regret", mean(&|r| r.regret));
    s.push("mean_spacing_dev_m", mean(&|r| r.spacing_dev));
    s.push("mean_w_beacon", mean(&|r| r.w[Sensor::Beacon.index()]));
    s.push("steady_from_step", cfg.steady_start());
    s.push("steady_mean_spacing_dev_m", steady_mean_spacing_dev(records, cfg.steady_start(), collided));
}

/// Greedy rollouts of a checkpoint's two networks, without learning.
pub fn eval(cfg: &ExperimentConfig, checkpoint: &Path, out: &Path) -> Result<()> {
    cfg.validate()?;
    let started = Instant::now();
    let ck = CheckpointBody::load(checkpoint)?;
    let grid = cfg.grid()?;
    ck.check_grid(&grid)?;
    let dir = RunDir::create(out)?;
    dir.write_lock(cfg)?;
    let mut game = CarFollowingGame::new(cfg.env_config()?, grid, stream(cfg.seed, Stream::Evaluation))?;
    let mut sink = Sink::new(&dir)?;
    let res = rollout(&mut game, Controller::Greedy(&ck.av), Controller::Greedy(&ck.att), cfg.episodes, cfg.steps, |ev| {
        sink.push(TraceRow::from_step(ev.episode, ev.step, 0.0, &ev.transition.record))
    });
    let history = sink.check(res)?;
    sink.trace.finish()?;
    let mut s = Summary::new("eval");
    push_common(&mut s, cfg);
    s.push("checkpoint_config_hash", &ck.config_hash);
    push_rollout_stats(&mut s, cfg, &sink.records, &episode_collisions(&history));
    s.write(&dir.path("summary.txt"))?;
    dir.write_timing(started)
}

/// Static inverse-variance follower against the configured attacker.
pub fn baseline(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    let started = Instant::now();
    let env_cfg = cfg.env_config()?;
    let grid = cfg.grid()?;
    let ck = match cfg.baseline_attacker.as_str() {
        "worst" | "idle" => None,
        path => {
            let ck = CheckpointBody::load(Path::new(path))?;
            ck.check_grid(&grid)?;
            Some(ck)
        }
    };
    let attacker = match (cfg.baseline_attacker.as_str(), &ck) {
        (_, Some(ck)) => BaselineAttacker::Frozen(&ck.att),
        ("idle", None) => BaselineAttacker::Idle,
        _ => BaselineAttacker::WorstGrid,
    };
    let dir = RunDir::create(out)?;
    dir.write_lock(cfg)?;
    let mut sink = Sink::new(&dir)?;
    let mut rng = stream(cfg.seed, Stream::Evaluation);
    let res = kalman_static_run(&env_cfg, &grid, attacker, cfg.episodes, cfg.steps, &mut rng, |ep, step, tr| sink.push(TraceRow::from_step(ep, step, 0.0, &tr.record)));
    let history = sink.check(res)?;
    sink.trace.finish()?;
    let mut s = Summary::new("baseline");
    push_common(&mut s, cfg);
    s.push("attacker", if ck.is_some() { "checkpoint" } else { cfg.baseline_attacker.as_str() });
    let w = inverse_variance_weights(&env_cfg.noise);
    for sensor in Sensor::ALL {
        s.push(&format!("static_w_{}", sensor.name()), w.get(sensor));
    }
    push_rollout_stats(&mut s, cfg, &sink.records, &episode_collisions(&history));
    s.write(&dir.path("summary.txt"))?;
    dir.write_timing(started)
}

/// What the oracle subcommand solves.
#[derive(Debug, Clone, Default)]
pub struct OracleRequest {
    pub exact: bool,
    pub matching_pennies: bool,
    /// Restrict the follower grid to these indices.
    pub av_subset: Option<Vec<usize>>,
    pub att_subset: Option<Vec<usize>>,
}

fn pick<T: Clone>(all: &[T], subset: &Option<Vec<usize>>, what: &str) -> Result<Vec<T>> {
    match subset {
        None => Ok(all.to_vec()),
        Some(idx) => idx
            .iter()
            .map(|&i| all.get(i).cloned().ok_or_else(|| CliError::config(what, format!("index {i} outside the grid of {}", all.len()))))
            .collect(),
    }
}

fn fmt_strategy(p: &MixedStrategy) -> String {
    p.probs().iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

/// Stage-game payoff matrix, fictitious play, and optionally the exact solution.
pub fn oracle(cfg: &ExperimentConfig, req: &OracleRequest, out: &Path) -> Result<()> {
    cfg.validate()?;
    let started = Instant::now();
    let (payoff, row_labels, col_labels) = if req.matching_pennies {
        let m = PayoffMatrix::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]])?;
        (m, vec!["heads".to_string(), "tails".into()], vec!["heads".to_string(), "tails".into()])
    } else {
        let grid = cfg.grid()?;
        let av = pick(grid.av_actions(), &req.av_subset, "av_subset")?;
        let att = pick(grid.att_actions(), &req.att_subset, "att_subset")?;
        let m = expected_payoff_matrix(&av, &att, &cfg.env_config()?.noise)?;
        let label = |v: &[f64; 4]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
        (m, av.iter().map(|w| label(w.as_array())).collect(), att.iter().map(|a| label(a.as_array())).collect())
    };
    if req.exact && (payoff.rows() > afsim_core::oracle::MAX_EXACT_DIM || payoff.cols() > afsim_core::oracle::MAX_EXACT_DIM) {
        return Err(CliError::config(
            "exact",
            format!("exact solve supports at most {0}x{0}, got {1}x{2}; restrict the grids with --av-subset/--att-subset", afsim_core::oracle::MAX_EXACT_DIM, payoff.rows(), payoff.cols()),
        ));
    }
    let dir = RunDir::create(out)?;
    dir.write_lock(cfg)?;

    let mut csv = String::from("row");
    for j in 0..payoff.cols() {
        let _ = write!(csv, ",col{j}");
    }
    csv.push('\n');
    for i in 0..payoff.rows() {
        let _ = write!(csv, "{i}");
        for j in 0..payoff.cols() {
            let _ = write!(csv, ",{}", payoff.get(i, j));
        }
        csv.push('\n');
    }
    dir.write("payoff.csv", &csv)?;

    let fp = fictitious_play(&payoff, cfg.fp_iterations)?;
    let mut hist = String::from("iteration,value,exploitability\n");
    for r in &fp.history {
        let _ = writeln!(hist, "{},{},{}", r.iteration, r.value, r.exploitability);
    }
    dir.write("fp_history.csv", &hist)?;

    let mut strat = String::from("method,player,index,action,probability\n");
    let mut add = |method: &str, player: &str, labels: &[String], p: &MixedStrategy| {
        for (i, (l, x)) in labels.iter().zip(p.probs()).enumerate() {
            let _ = writeln!(strat, "{method},{player},{i},{l},{x}");
        }
    };
    add("fictitious", "av", &row_labels, &fp.av);
    add("fictitious", "att", &col_labels, &fp.att);

    let mut s = Summary::new("oracle");
    push_common(&mut s, cfg);
    s.push("game", if req.matching_pennies { "matching_pennies" } else { "stage" });
    s.push("rows", payoff.rows());
    s.push("cols", payoff.cols());
    s.push("fp_iterations", cfg.fp_iterations);
    s.push("fp_value", fp.value);
    s.push("fp_exploitability", fp.exploitability);
    s.push("fp_av", fmt_strategy(&fp.av));
    s.push("fp_att", fmt_strategy(&fp.att));
    let h = &fp.history;
    let quarter = (h.len() / 4).max(1).min(h.len());
    let avg = |xs: &[afsim_core::oracle::FpRecord]| xs.iter().map(|r| r.exploitability).sum::<f64>() / xs.len().max(1) as f64;
    s.push("fp_exploitability_first_quarter", avg(&h[..quarter]));
    s.push("fp_exploitability_last_quarter", avg(&h[h.len() - quarter..]));
    if req.exact {
        let e = exact_msne_small(&payoff)?;
        add("exact", "av", &row_labels, &e.av);
        add("exact", "att", &col_labels, &e.att);
        s.push("exact_value", e.value);
        s.push("exact_exploitability", payoff.exploitability(&e.av, &e.att));
        s.push("exact_av", fmt_strategy(&e.av));
        s.push("exact_att", fmt_strategy(&e.att));
        s.push("fp_value_error", (fp.value - e.value).abs());
    }
    dir.write("strategies.csv", &strat)?;
    s.write(&dir.path("summary.txt"))?;
    dir.write_timing(started)
}
