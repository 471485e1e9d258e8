//! Running an experiment and writing its artifacts.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, OutputFormat};
use super::generate::generate_sequence;
use crate::complexity::RNG_NAME;
use crate::forecasters::{run_online, RoundRecord};
use crate::{Error, Result};

/// Slack allowed when comparing final regret with the bound.
pub const BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub forecaster: String,
    pub horizon: usize,
    pub final_regret: f64,
    pub bound: Option<f64>,
    pub bound_satisfied: Option<bool>,
    pub rng: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactBundle {
    pub summary: Summary,
    pub records: Vec<RoundRecord>,
    pub log: PathBuf,
    pub summary_path: PathBuf,
    pub curve: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

/// Plays the experiment without touching the file system.
pub fn simulate(config: &ExperimentConfig) -> Result<(Vec<RoundRecord>, Summary)> {
    let seq = generate_sequence(config)?;
    let model = config.model()?;
    let mut forecaster = config.build_forecaster()?;
    let run = run_online(forecaster.as_mut(), &seq, &model, &config.family).map_err(|a| a.error)?;
    let bound = config.regret_bound()?;
    let summary = Summary {
        forecaster: forecaster.name(),
        horizon: config.horizon,
        final_regret: run.regret,
        bound,
        bound_satisfied: bound.map(|b| run.regret <= b + BOUND_TOL),
        rng: RNG_NAME.into(),
        seed: config.seed,
    };
    Ok((run.records, summary))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents).map_err(|e| Error::io(path, e))
}

/// Runs `config` and writes `rounds.jsonl`, `summary.json` and, when
/// requested, `regret.csv` and `regret.svg` into the output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ArtifactBundle> {
    let (records, summary) = simulate(config)?;
    let dir = &config.output.directory;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let log = dir.join("rounds.jsonl");
    let mut text = String::new();
    for r in &records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    write_file(&log, text.as_bytes())?;

    let summary_path = dir.join("summary.json");
    write_file(&summary_path, serde_json::to_string_pretty(&summary)?.as_bytes())?;

    let formats = &config.output.formats;
    let curve = if formats.contains(&OutputFormat::Csv) {
        let p = dir.join("regret.csv");
        let mut w = csv::Writer::from_path(&p).map_err(|e| csv_error(&p, e))?;
        w.write_record(["t", "cumulative_regret", "bound"]).map_err(|e| csv_error(&p, e))?;
        for r in &records {
            let bound = summary.bound.map_or(String::new(), |b| b.to_string());
            w.write_record([r.t.to_string(), r.cumulative_regret.to_string(), bound])
                .map_err(|e| csv_error(&p, e))?;
        }
        w.flush().map_err(|e| Error::io(&p, e))?;
        Some(p)
    } else {
        None
    };
    let plot = if formats.contains(&OutputFormat::Svg) {
        let p = dir.join("regret.svg");
        write_file(&p, regret_svg(&records, summary.bound).as_bytes())?;
        Some(p)
    } else {
        None
    };
    Ok(ArtifactBundle {
        summary,
        records,
        log,
        summary_path,
        curve,
        plot,
    })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

/// A line plot of cumulative regret (and the bound, dashed) against `t`.
pub fn regret_svg(records: &[RoundRecord], bound: Option<f64>) -> String {
    let (w, h, pad) = (640.0, 400.0, 40.0);
    let n = records.len().max(1) as f64;
    let mut lo = bound.unwrap_or(0.0).min(0.0);
    let mut hi = bound.unwrap_or(0.0).max(0.0);
    for r in records {
        lo = lo.min(r.cumulative_regret);
        hi = hi.max(r.cumulative_regret);
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let sx = |t: f64| pad + (w - 2.0 * pad) * t / n;
    let sy = |v: f64| h - pad - (h - 2.0 * pad) * (v - lo) / (hi - lo);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{pad}" y1="{y0:.2}" x2="{x1}" y2="{y0:.2}" stroke="gray"/>"#,
        y0 = sy(0.0),
        x1 = w - pad
    );
    let points: Vec<String> = std::iter::once((0.0, 0.0))
        .chain(records.iter().map(|r| (r.t as f64, r.cumulative_regret)))
        .map(|(t, v)| format!("{:.2},{:.2}", sx(t), sy(v)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#,
        points.join(" ")
    );
    if let Some(b) = bound {
        let _ = writeln!(
            s,
            r#"<line x1="{pad}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="firebrick" stroke-dasharray="6 4"/>"#,
            y = sy(b),
            x1 = w - pad
        );
    }
    let _ = writeln!(s, r#"<text x="{pad}" y="20" font-size="12">cumulative regret vs t (n = {})</text>"#, records.len());
    s.push_str("</svg>\n");
    s
}
