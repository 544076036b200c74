//! `summary.txt`: ordered `key=value` statistics of one run.

use crate::error::{CliError, Result};
use crate::trace::{TraceRow, TRACE_SCHEMA};
use afsim_core::fusion::Sensor;
use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    entries: Vec<(String, String)>,
}

impl Summary {
    pub fn new(command: &str) -> Self {
        let mut s = Summary::default();
        s.push("trace_schema", TRACE_SCHEMA);
        s.push("command", command);
        s
    }

    pub fn push(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.text()).map_err(|e| CliError::io(path, e))
    }
}

/// Parses a summary (or any flat `key=value` file) into a map.
pub fn read_summary(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = crate::config::split_assignment(line).ok_or_else(|| CliError::parse(path, i as u64 + 1, "expected key=value"))?;
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 { f64::NAN } else { s / n as f64 }
}

/// Statistics of the first and final tenth of all logged steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub window_steps: usize,
    pub first_mean_regret: f64,
    pub final_mean_regret: f64,
    pub final_mean_spacing_dev: f64,
    pub final_mean_w: [f64; 4],
}

impl WindowStats {
    pub fn of(rows: &[StepRecord]) -> Self {
        let k = (rows.len() / 10).max(1).min(rows.len());
        let first = &rows[..k];
        let last = &rows[rows.len() - k..];
        let w = |i: usize| mean(last.iter().map(|r| r.w[i]));
        WindowStats {
            window_steps: k,
            first_mean_regret: mean(first.iter().map(|r| r.regret)),
            final_mean_regret: mean(last.iter().map(|r| r.regret)),
            final_mean_spacing_dev: mean(last.iter().map(|r| r.spacing_dev)),
            final_mean_w: [w(0), w(1), w(2), w(3)],
        }
    }

    pub fn push_to(&self, s: &mut Summary) {
        s.push("window_steps", self.window_steps);
        s.push("first_window_mean_regret", self.first_mean_regret);
        s.push("final_window_mean_regret", self.final_mean_regret);
        s.push("final_window_mean_spacing_dev_m", self.final_mean_spacing_dev);
        for sensor in Sensor::ALL {
            s.push(&format!("final_window_mean_w_{}", sensor.name()), self.final_mean_w[sensor.index()]);
        }
    }
}

/// The part of a trace row the summaries need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub episode: usize,
    pub step: usize,
    pub w: [f64; 4],
    pub regret: f64,
    pub spacing_dev: f64,
}

impl From<&TraceRow> for StepRecord {
    fn from(r: &TraceRow) -> Self {
        StepRecord { episode: r.episode, step: r.step, w: r.w, regret: r.regret, spacing_dev: r.spacing_dev_m }
    }
}

/// Mean |spacing deviation| over steps at or after `start` in each episode.
///
/// An episode that ended in a collision counts as infinite deviation: the
/// follower failed outright, which no finite spacing error should beat.
pub fn steady_mean_spacing_dev(rows: &[StepRecord], start: usize, collided: &[bool]) -> f64 {
    if collided.iter().any(|&c| c) {
        return f64::INFINITY;
    }
    mean(rows.iter().filter(|r| r.step >= start).map(|r| r.spacing_dev))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(episode: usize, step: usize, regret: f64) -> StepRecord {
        StepRecord { episode, step, w: [0.0, 0.0, 1.0, 0.0], regret, spacing_dev: step as f64 }
    }

    #[test]
    fn windows_are_tenths() {
        let rows: Vec<StepRecord> = (0..100).map(|i| rec(0, i, i as f64)).collect();
        let w = WindowStats::of(&rows);
        assert_eq!(w.window_steps, 10);
        assert_eq!(w.first_mean_regret, 4.5);
        assert_eq!(w.final_mean_regret, 94.5);
        assert_eq!(w.final_mean_w[2], 1.0);
    }

    #[test]
    fn steady_window_and_collisions() {
        let rows: Vec<StepRecord> = (0..10).map(|i| rec(0, i, 0.0)).collect();
        assert_eq!(steady_mean_spacing_dev(&rows, 5, &[false]), 7.0);
        assert_eq!(steady_mean_spacing_dev(&rows, 5, &[true]), f64::INFINITY);
    }

    #[test]
    fn summary_text_parses_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.txt");
        let mut s = Summary::new("train");
        s.push("x", 1.5);
        s.write(&path).unwrap();
        let m = read_summary(&path).unwrap();
        assert_eq!(m["trace_schema"], "1");
        assert_eq!(m["x"], "1.5");
    }
}
