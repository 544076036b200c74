//! Per-step experiment traces (`trace.csv`).

use crate::error::{CliError, Result};
use afsim_core::fusion::SENSOR_COUNT;
use afsim_core::rl::CarFollowingStep;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Version of the column layout below, echoed in every summary.
pub const TRACE_SCHEMA: u32 = 1;

pub const TRACE_HEADER: &str = "step,episode,w1,w2,w3,w4,a1,a2,a3,a4,delta,spacing_m,spacing_dev_m,regret,eps_explore";

const COLUMNS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    /// Step index within the episode.
    pub step: usize,
    pub episode: usize,
    pub w: [f64; SENSOR_COUNT],
    pub a: [f64; SENSOR_COUNT],
    pub delta: f64,
    pub spacing_m: f64,
    pub spacing_dev_m: f64,
    pub regret: f64,
    pub eps_explore: f64,
}

impl TraceRow {
    pub fn from_step(episode: usize, step: usize, eps: f64, rec: &CarFollowingStep) -> Self {
        TraceRow {
            step,
            episode,
            w: rec.w,
            a: rec.a,
            delta: rec.outcome.delta,
            spacing_m: rec.outcome.spacing,
            spacing_dev_m: rec.outcome.spacing_dev,
            regret: rec.outcome.regret,
            eps_explore: eps,
        }
    }
}

/// Buffered CSV writer. Floats use the shortest representation that
/// parses back to the same value, so equal runs give equal bytes.
pub struct TraceWriter {
    path: PathBuf,
    out: BufWriter<File>,
    rows: usize,
}

impl TraceWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut w = TraceWriter { path: path.to_path_buf(), out: BufWriter::new(file), rows: 0 };
        writeln!(w.out, "{TRACE_HEADER}").map_err(|e| CliError::io(path, e))?;
        Ok(w)
    }

    pub fn write(&mut self, r: &TraceRow) -> Result<()> {
        let [w1, w2, w3, w4] = r.w;
        let [a1, a2, a3, a4] = r.a;
        writeln!(
            self.out,
            "{},{},{w1},{w2},{w3},{w4},{a1},{a2},{a3},{a4},{},{},{},{},{}",
            r.step, r.episode, r.delta, r.spacing_m, r.spacing_dev_m, r.regret, r.eps_explore
        )
        .map_err(|e| CliError::io(&self.path, e))?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn finish(mut self) -> Result<usize> {
        self.out.flush().map_err(|e| CliError::io(&self.path, e))?;
        Ok(self.rows)
    }
}

/// Reads a trace, checking the header and every field.
pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(file);
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_error(path, e))?,
        None => return Err(CliError::parse(path, 1, "missing header")),
    };
    let got: Vec<&str> = header.iter().collect();
    if got.join(",") != TRACE_HEADER {
        return Err(CliError::parse(path, 1, format!("unexpected header {:?}", got.join(","))));
    }
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != COLUMNS {
            return Err(CliError::parse(path, line, format!("expected {COLUMNS} fields, got {}", rec.len())));
        }
        let f = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|_| CliError::parse(path, line, format!("column {}: cannot parse {:?}", i + 1, &rec[i])))
        };
        let u = |i: usize| -> Result<usize> {
            rec[i].parse::<usize>().map_err(|_| CliError::parse(path, line, format!("column {}: cannot parse {:?}", i + 1, &rec[i])))
        };
        rows.push(TraceRow {
            step: u(0)?,
            episode: u(1)?,
            w: [f(2)?, f(3)?, f(4)?, f(5)?],
            a: [f(6)?, f(7)?, f(8)?, f(9)?],
            delta: f(10)?,
            spacing_m: f(11)?,
            spacing_dev_m: f(12)?,
            regret: f(13)?,
            eps_explore: f(14)?,
        });
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        kind => CliError::parse(path, line, format!("{kind:?}")),
    }
}
