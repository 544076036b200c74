//! End-to-end checks of the `afsim` binary.

use afsim_cli::summary::read_summary;
use afsim_cli::trace::{read_trace, TRACE_HEADER};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &[&str] = &["--episodes", "2", "--steps", "60", "--set", "hidden=4", "--set", "replay=100"];

fn afsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afsim")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = afsim(args);
    assert!(out.status.success(), "afsim {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn fails_with(args: &[&str], code: i32, prefix: &str) -> String {
    let out = afsim(args);
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert_eq!(out.status.code(), Some(code), "afsim {args:?}: {err}");
    assert!(err.starts_with(prefix), "stderr {err:?} lacks {prefix:?}");
    err
}

fn with<'a>(base: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
    base.iter().chain(extra).copied().collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn trace_header_is_golden() {
    assert_eq!(TRACE_HEADER, "step,episode,w1,w2,w3,w4,a1,a2,a3,a4,delta,spacing_m,spacing_dev_m,regret,eps_explore");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    ok(&with(&["train", "--out", s(&out)], SMALL));
    let text = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(text.lines().next(), Some(TRACE_HEADER));
    assert_eq!(read_trace(&out.join("trace.csv")).unwrap().len(), 120);
    let summary = read_summary(&out.join("summary.txt")).unwrap();
    assert_eq!(summary["trace_schema"], "1");
    assert_eq!(summary["steps_total"], "120");
    for f in ["config.lock", "checkpoint.json", "timing.txt", "episodes.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<PathBuf> = ["a", "b", "c"].iter().map(|n| dir.path().join(n)).collect();
    ok(&with(&["train", "--seed", "5", "--out", s(&runs[0])], SMALL));
    ok(&with(&["train", "--seed", "5", "--out", s(&runs[1])], SMALL));
    ok(&with(&["train", "--seed", "6", "--out", s(&runs[2])], SMALL));
    let read = |p: &Path, f: &str| std::fs::read(p.join(f)).unwrap();
    for f in ["trace.csv", "summary.txt", "checkpoint.json", "config.lock"] {
        assert_eq!(read(&runs[0], f), read(&runs[1], f), "{f} differs between equal seeds");
    }
    assert_ne!(read(&runs[0], "trace.csv"), read(&runs[2], "trace.csv"));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(&cfg, "# small run\nscenario = none\nseed = 9\nhidden = 4\n").unwrap();
    let out = dir.path().join("run");
    ok(&["train", "--config", s(&cfg), "--episodes", "1", "--steps", "20", "--set", "seed=3", "--seed", "4", "--out", s(&out)]);
    let lock = read_summary(&out.join("config.lock")).unwrap();
    assert_eq!(lock["scenario"], "none");
    assert_eq!(lock["hidden"], "4");
    assert_eq!(lock["seed"], "4", "flags win over --set and the file");
    // The lock file is itself a valid config.
    let again = dir.path().join("again");
    ok(&["train", "--config", s(&out.join("config.lock")), "--out", s(&again)]);
    assert_eq!(std::fs::read(out.join("trace.csv")).unwrap(), std::fs::read(again.join("trace.csv")).unwrap());
}

#[test]
fn bad_config_exits_2_with_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let err = fails_with(&["train", "--set", "bogus=1", "--out", s(&out)], 2, "error[config]:");
    assert!(err.contains("bogus"));
    let err = fails_with(&["train", "--set", "gamma=2", "--out", s(&out)], 2, "error[config]:");
    assert!(err.contains("gamma"));
    let err = fails_with(&["train", "--scenario", "sideways", "--out", s(&out)], 2, "error[config]:");
    assert!(err.contains("scenario"));
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "seed = 1\nsigma = 1,2\n").unwrap();
    let err = fails_with(&["train", "--config", s(&cfg), "--out", s(&out)], 2, "error[parse]:");
    assert!(err.contains("bad.cfg:2:"), "{err}");
    assert!(!out.exists(), "nothing may be written before validation passes");
}

#[test]
fn usage_and_io_errors() {
    fails_with(&[], 2, "error[usage]:");
    fails_with(&["train", "--episodes", "many"], 2, "error[usage]:");
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    std::fs::write(&file, "x").unwrap();
    fails_with(&with(&["train", "--out", s(&file.join("sub"))], SMALL), 3, "error[io]:");
    fails_with(&["eval", "--checkpoint", s(&dir.path().join("missing.json")), "--out", s(&dir.path().join("e"))], 3, "error[io]:");
}

#[test]
fn zero_checkpoint_plays_index_zero() {
    let dir = tempfile::tempdir().unwrap();
    let init = dir.path().join("init");
    ok(&["train", "--init-only", "--set", "init_scale=0", "--out", s(&init)]);
    let ck = init.join("checkpoint.json");
    let ev = dir.path().join("eval");
    ok(&["eval", "--checkpoint", s(&ck), "--episodes", "1", "--steps", "40", "--out", s(&ev)]);
    let rows = read_trace(&ev.join("trace.csv")).unwrap();
    assert_eq!(rows.len(), 40);
    for r in &rows {
        assert_eq!(r.w, [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(r.a, [0.0, 0.0, -1.0, 0.0]);
        assert_eq!(r.eps_explore, 0.0);
    }
    // Repeat evaluation is deterministic.
    let ev2 = dir.path().join("eval2");
    ok(&["eval", "--checkpoint", s(&ck), "--episodes", "1", "--steps", "40", "--out", s(&ev2)]);
    assert_eq!(std::fs::read(ev.join("trace.csv")).unwrap(), std::fs::read(ev2.join("trace.csv")).unwrap());
    // A different grid cannot reuse the checkpoint.
    let err = fails_with(&["eval", "--checkpoint", s(&ck), "--set", "weight_divisions=2", "--out", s(&ev2)], 2, "error[config]:");
    assert!(err.contains("grid"));
}

/// `E[δ(n)²] = v·Σ_{j≤n} c_j²` with `c_j = Σ_{l=0}^{min(j, n̄)} q^l`: each
/// estimation error of variance `v` enters the deviation at every later
/// step with the truncated geometric weight of its age.
fn noise_floor_mean_regret(v: f64, q: f64, depth: usize, steps: usize, spacing_per_dev: f64) -> f64 {
    let mut c = 0.0;
    let mut acc = 0.0;
    let mut total = 0.0;
    for j in 0..steps {
        if j <= depth {
            c += q.powi(j as i32);
        }
        acc += c * c;
        total += v * acc;
    }
    spacing_per_dev * spacing_per_dev * total / steps as f64
}

#[test]
fn idle_baseline_matches_noise_floor() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("base");
    ok(&["baseline", "--scenario", "none", "--attacker", "idle", "--episodes", "200", "--steps", "1000", "--out", s(&out)]);
    let sm = read_summary(&out.join("summary.txt")).unwrap();
    let w: Vec<f64> = ["camera", "radar", "beacon", "rss"].iter().map(|k| sm[&format!("static_w_{k}")].parse().unwrap()).collect();
    let sigma = [0.2f64, 0.4, 0.05, 0.8];
    let v: f64 = w.iter().zip(sigma).map(|(w, s)| w * w * s * s).sum();
    let floor = noise_floor_mean_regret(v, 0.9, 66, 1000, 0.01);
    let got: f64 = sm["mean_regret"].parse().unwrap();
    assert!((got - floor).abs() <= 0.2 * floor, "mean regret {got} vs analytic floor {floor}");
}

#[test]
fn worst_case_baseline_drifts_at_the_analytic_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("base");
    ok(&["baseline", "--scenario", "beacon", "--episodes", "1", "--steps", "1000", "--out", s(&out)]);
    let sm = read_summary(&out.join("summary.txt")).unwrap();
    let w_b: f64 = sm["static_w_beacon"].parse().unwrap();
    let rate = w_b * (0..=66).map(|l| 0.9f64.powi(l)).sum::<f64>();
    let rows = read_trace(&out.join("trace.csv")).unwrap();
    let pts: Vec<(f64, f64)> = rows[200..].iter().map(|r| (r.step as f64, r.delta.abs())).collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope - rate).abs() <= 0.02 * rate, "slope {slope} vs {rate}");
}

#[test]
fn baseline_and_train_share_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let (t, b) = (dir.path().join("t"), dir.path().join("b"));
    ok(&with(&["train", "--out", s(&t)], SMALL));
    ok(&["baseline", "--attacker", s(&t.join("checkpoint.json")), "--episodes", "1", "--steps", "30", "--out", s(&b)]);
    let head = |p: &Path| std::fs::read_to_string(p.join("trace.csv")).unwrap().lines().next().unwrap().to_string();
    assert_eq!(head(&t), head(&b));
    assert_eq!(read_summary(&b.join("summary.txt")).unwrap()["attacker"], "checkpoint");
}

#[test]
fn oracle_reports() {
    let dir = tempfile::tempdir().unwrap();
    let mp = dir.path().join("mp");
    ok(&["oracle", "--matching-pennies", "--exact", "--out", s(&mp)]);
    let sm = read_summary(&mp.join("summary.txt")).unwrap();
    for p in sm["fp_av"].split(',').chain(sm["fp_att"].split(',')) {
        assert!((p.parse::<f64>().unwrap() - 0.5).abs() <= 0.02);
    }
    assert_eq!(sm["exact_av"], "0.5,0.5");
    assert!(sm["fp_value"].parse::<f64>().unwrap().abs() <= 0.02);

    let red = dir.path().join("reduced");
    ok(&["oracle", "--exact", "--av-subset", "0,5", "--att-subset", "0,2", "--out", s(&red)]);
    let sm = read_summary(&red.join("summary.txt")).unwrap();
    assert_eq!((sm["rows"].as_str(), sm["cols"].as_str()), ("2", "2"));
    assert!(sm["fp_value_error"].parse::<f64>().unwrap() <= 1e-2);
    let first: f64 = sm["fp_exploitability_first_quarter"].parse().unwrap();
    let last: f64 = sm["fp_exploitability_last_quarter"].parse().unwrap();
    assert!(last <= first);
    assert!(red.join("payoff.csv").is_file() && red.join("strategies.csv").is_file() && red.join("fp_history.csv").is_file());

    fails_with(&["oracle", "--exact", "--out", s(&dir.path().join("big"))], 2, "error[config]:");
}

fn polyline_points(svg: &str) -> Vec<usize> {
    svg.match_indices("<polyline")
        .map(|(i, _)| {
            let rest = &svg[i..];
            let start = rest.find("points=\"").unwrap() + 8;
            let end = start + rest[start..].find('"').unwrap();
            rest[start..end].split_whitespace().count()
        })
        .collect()
}

#[test]
fn plots_keep_every_row() {
    let dir = tempfile::tempdir().unwrap();
    let (t, b) = (dir.path().join("t"), dir.path().join("b"));
    ok(&with(&["train", "--out", s(&t)], SMALL));
    ok(&["baseline", "--episodes", "1", "--steps", "50", "--out", s(&b)]);
    let one = dir.path().join("plots1");
    ok(&["plot", s(&t.join("trace.csv")), "--out", s(&one)]);
    for f in ["weights.svg", "attacks.svg", "regret.svg", "spacing_dev.svg"] {
        assert!(one.join(f).is_file(), "{f}");
    }
    let regret = std::fs::read_to_string(one.join("regret.svg")).unwrap();
    assert!(polyline_points(&regret).contains(&120));
    let two = dir.path().join("plots2");
    ok(&["plot", s(&t.join("trace.csv")), s(&b.join("trace.csv")), "--out", s(&two)]);
    let pts = polyline_points(&std::fs::read_to_string(two.join("regret.svg")).unwrap());
    assert!(pts.contains(&120) && pts.contains(&50), "{pts:?}");
}

#[test]
fn plot_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, format!("{TRACE_HEADER}\n")).unwrap();
    let out = dir.path().join("p");
    ok(&["plot", s(&empty), "--out", s(&out)]);
    assert!(out.join("regret.svg").is_file());
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, format!("{TRACE_HEADER}\n0,0,1,0,0,0,0,0,0,0,0,1,0,0,1\n0,0,1,0,0\n")).unwrap();
    let err = fails_with(&["plot", s(&bad), "--out", s(&out)], 2, "error[parse]:");
    assert!(err.contains("bad.csv:3:"), "{err}");
}
