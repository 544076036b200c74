//! SVG line charts of one trace, or overlays of two.
//!
//! The x axis is the row index of the trace, so every row becomes exactly
//! one point of each series; nothing is resampled.

use crate::error::{CliError, Result};
use crate::trace::{read_trace, TraceRow};
use plotters::prelude::*;
use std::path::{Path, PathBuf};

/// One chart: file stem, title, and the per-row series it draws.
struct Metric {
    stem: &'static str,
    title: &'static str,
    series: &'static [(&'static str, fn(&TraceRow) -> f64)],
}

const METRICS: &[Metric] = &[
    Metric {
        stem: "weights",
        title: "Follower fusion weights",
        series: &[("w camera", |r| r.w[0]), ("w radar", |r| r.w[1]), ("w beacon", |r| r.w[2]), ("w rss", |r| r.w[3])],
    },
    Metric {
        stem: "attacks",
        title: "Attacker injections (m/s)",
        series: &[("a camera", |r| r.a[0]), ("a radar", |r| r.a[1]), ("a beacon", |r| r.a[2]), ("a rss", |r| r.a[3])],
    },
    Metric { stem: "regret", title: "Regret (m^2)", series: &[("regret", |r| r.regret)] },
    Metric { stem: "spacing_dev", title: "Spacing deviation (m)", series: &[("|spacing deviation|", |r| r.spacing_dev_m)] },
];

const PALETTE: [RGBColor; 8] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
    RGBColor(227, 119, 194),
    RGBColor(127, 127, 127),
];

fn draw_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::io(path, std::io::Error::other(e.to_string()))
}

fn chart(path: &Path, metric: &Metric, traces: &[(String, Vec<TraceRow>)]) -> Result<()> {
    let max_rows = traces.iter().map(|t| t.1.len()).max().unwrap_or(0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, rows) in traces {
        for (_, f) in metric.series {
            for r in rows {
                let y = f(r);
                if y.is_finite() {
                    lo = lo.min(y);
                    hi = hi.max(y);
                }
            }
        }
    }
    if !(lo <= hi) {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo, hi) = (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    let root = SVGBackend::new(path, (960, 540)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| draw_err(path, e))?;
    let mut ch = ChartBuilder::on(&root)
        .caption(metric.title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(64)
        .build_cartesian_2d(0f64..(max_rows.max(2) - 1) as f64, (lo - pad)..(hi + pad))
        .map_err(|e| draw_err(path, e))?;
    ch.configure_mesh().x_desc("trace row").draw().map_err(|e| draw_err(path, e))?;
    let mut color = 0;
    for (name, rows) in traces {
        for (label, f) in metric.series {
            let c = PALETTE[color % PALETTE.len()];
            color += 1;
            let legend = if traces.len() > 1 { format!("{label} ({name})") } else { label.to_string() };
            ch.draw_series(LineSeries::new(rows.iter().enumerate().map(|(i, r)| (i as f64, f(r))), c.stroke_width(1)))
                .map_err(|e| draw_err(path, e))?
                .label(legend)
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], c));
        }
    }
    ch.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(|e| draw_err(path, e))?;
    root.present().map_err(|e| draw_err(path, e))?;
    Ok(())
}

/// Emits one SVG per metric into `out`; with two traces each chart overlays both.
pub fn plot(traces: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>> {
    if traces.is_empty() || traces.len() > 2 {
        return Err(CliError::Usage(format!("plot takes one or two traces, got {}", traces.len())));
    }
    let loaded: Vec<(String, Vec<TraceRow>)> = traces
        .iter()
        .map(|p| Ok((p.parent().and_then(|d| d.file_name()).map_or_else(|| p.display().to_string(), |d| d.to_string_lossy().into_owned()), read_trace(p)?)))
        .collect::<Result<_>>()?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut written = Vec::new();
    for m in METRICS {
        let path = out.join(format!("{}.svg", m.stem));
        chart(&path, m, &loaded)?;
        written.push(path);
    }
    Ok(written)
}
