//! `offreg`: experiments, admissibility checks, complexity calculators,
//! tiny-game solver and the acceptance suite.
//!
//! Exit codes: 0 success, 1 a check failed, 2 bad usage or input.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use offreg::comparators::{ComparatorFamily, Covariate, FiniteTable};
use offreg::complexity::{
    dudley_bound_steps, fat_shattering, khinchine_check, offset_rademacher, rate_lower, rate_upper, seq_cover_number,
    seq_rademacher, Norm, RateConstants,
};
use offreg::forecasters::{
    check_admissibility, check_admissibility_exhaustive, AdmissibilityReport, CondRadRelaxation, ExpertsRelaxation,
    PredictionSet, RelaxationOracle, VawCapacity, VawRelaxation,
};
use offreg::harness::verify::{all_passed, broken_relaxation_check, render, verify_suite, Level};
use offreg::harness::{run_experiment, ExperimentConfig, OutputFormat, Summary};
use offreg::losses::{LossConfig, LossModel};
use offreg::minimax::{optimal_adversary, GameSpec};
use offreg::trees::LabeledTree;
use offreg::Error;

/// Soft budget for the full suite.
const FULL_SUITE_BUDGET_SECS: f64 = 600.0;

#[derive(Parser)]
#[command(name = "offreg", version, about = "Relaxation forecasters and sequential complexities at desk scale")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Fast,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum Quantity {
    Rademacher,
    Offset,
    Cover,
    Fat,
    Dudley,
    Rates,
    Khinchine,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more experiment configs (concurrently) and write artifacts.
    Run {
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Artifact formats; replaces the config's list when given.
        #[arg(long = "format")]
        formats: Vec<Format>,
    },
    /// Check a relaxation's admissibility on grids.
    Admissibility {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a complexity quantity.
    Complexity {
        #[arg(value_enum)]
        quantity: Quantity,
        /// Request file; optional for `khinchine`.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a tiny game and export the optimal strategies.
    Minimax {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance suite.
    Verify {
        #[arg(long, value_enum, default_value = "fast")]
        level: LevelArg,
        /// Add a deliberately inadmissible relaxation as a regular check.
        #[arg(long)]
        inject_broken: bool,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
}

enum Outcome {
    Ok,
    CheckFailed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("offreg: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> Result<Outcome, Error> {
    match cmd {
        Command::Run {
            configs,
            seed,
            out,
            formats,
        } => run(&configs, seed, out, &formats),
        Command::Admissibility { config, out } => {
            let req: AdmissibilityRequest = read_json(&config)?;
            let report = req.check()?;
            emit(&report, out.as_deref())?;
            Ok(if report.admissible { Outcome::Ok } else { Outcome::CheckFailed })
        }
        Command::Complexity { quantity, config, out } => {
            let value = complexity(quantity, config.as_deref())?;
            emit(&value, out.as_deref())?;
            Ok(Outcome::Ok)
        }
        Command::Minimax { config, out } => {
            let spec: GameSpec = read_json(&config)?;
            spec.validate()?;
            let solved = optimal_adversary(&spec)?.export()?;
            emit(&solved, out.as_deref())?;
            Ok(Outcome::Ok)
        }
        Command::Verify {
            level,
            inject_broken,
            format,
        } => verify(level, inject_broken, format),
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Pretty JSON to `out`, or to stdout.
fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| io_error(p, e)),
        None => {
            print_stdout(&text);
            Ok(())
        }
    }
}

/// Writes a line to stdout; a closed pipe (e.g. `| head`) is not an error.
fn print_stdout(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn run(paths: &[PathBuf], seed: Option<u64>, out: Option<PathBuf>, formats: &[Format]) -> Result<Outcome, Error> {
    let mut configs = Vec::with_capacity(paths.len());
    for path in paths {
        let mut cfg = ExperimentConfig::load(path)?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if let Some(dir) = &out {
            cfg.output.directory = if paths.len() == 1 {
                dir.clone()
            } else {
                let stem = path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
                dir.join(stem)
            };
        }
        if !formats.is_empty() {
            cfg.output.formats = formats
                .iter()
                .map(|f| match f {
                    Format::Json => OutputFormat::Json,
                    Format::Csv => OutputFormat::Csv,
                    Format::Svg => OutputFormat::Svg,
                })
                .collect();
        }
        configs.push(cfg);
    }
    let results: Vec<Result<Summary, Error>> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| s.spawn(move || run_experiment(cfg).map(|b| b.summary)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("experiment thread panicked")).collect()
    });
    let mut failed = false;
    for (path, result) in paths.iter().zip(results) {
        let summary = result.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        failed |= summary.bound_satisfied == Some(false);
        print_stdout(&serde_json::to_string(&summary)?);
    }
    Ok(if failed { Outcome::CheckFailed } else { Outcome::Ok })
}

fn verify(level: LevelArg, inject_broken: bool, format: Option<Format>) -> Result<Outcome, Error> {
    let level = match level {
        LevelArg::Fast => Level::Fast,
        LevelArg::Full => Level::Full,
    };
    let start = Instant::now();
    let mut results = verify_suite(level);
    if inject_broken {
        results.push(broken_relaxation_check());
    }
    let secs = start.elapsed().as_secs_f64();
    match format {
        None => print_stdout(render(&results).trim_end()),
        Some(Format::Json) => print_stdout(&serde_json::to_string_pretty(&results)?),
        Some(f) => {
            let name = if f == Format::Csv { "csv" } else { "svg" };
            return Err(Error::InvalidArgument(format!("verify prints a table or json, not {name}")));
        }
    }
    if level == Level::Full && secs > FULL_SUITE_BUDGET_SECS {
        eprintln!("warning: full suite took {secs:.0} s (budget {FULL_SUITE_BUDGET_SECS} s)");
    }
    let failing: Vec<&str> = results.iter().filter(|r| !r.passed && !r.companion).map(|r| r.name.as_str()).collect();
    if all_passed(&results) {
        eprintln!("all {} checks passed in {secs:.1} s", results.len());
        Ok(Outcome::Ok)
    } else {
        eprintln!("{} failing: {}", failing.len(), failing.join("; "));
        Ok(Outcome::CheckFailed)
    }
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RelaxationRequest {
    Experts {
        table: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: f64,
        #[serde(default)]
        temperature: Option<f64>,
        horizon: usize,
    },
    Vaw {
        lambda: f64,
        #[serde(rename = "B")]
        b: f64,
        horizon: usize,
        dimension: usize,
        #[serde(default)]
        capacity: Option<VawCapacity>,
    },
    CondRad {
        table: Vec<Vec<f64>>,
        loss: LossConfig,
        covariate_set: Vec<usize>,
        mean_grid: Vec<f64>,
        horizon: usize,
    },
}

#[derive(Deserialize)]
struct AdmissibilityRequest {
    relaxation: RelaxationRequest,
    /// Candidate covariates: ids for tables, vectors for linear classes.
    covariates: Vec<Covariate>,
    outcome_grid: Vec<f64>,
    /// Checked prefixes; every history over the grids when absent.
    #[serde(default)]
    histories: Option<Vec<Vec<(Covariate, f64)>>>,
}

impl AdmissibilityRequest {
    fn check(&self) -> Result<AdmissibilityReport, Error> {
        let (rel, model, family): (Box<dyn RelaxationOracle>, LossModel, ComparatorFamily) = match &self.relaxation {
            RelaxationRequest::Experts {
                table,
                b,
                temperature,
                horizon,
            } => {
                let t = FiniteTable::new(table.clone())?;
                let rel = ExpertsRelaxation::with_temperature(t.clone(), *b, temperature.unwrap_or(b * b), *horizon)?;
                (Box::new(rel), LossModel::square(*b), ComparatorFamily::FiniteTable(t))
            }
            RelaxationRequest::Vaw {
                lambda,
                b,
                horizon,
                dimension,
                capacity,
            } => {
                let mut rel = VawRelaxation::new(*lambda, *b, *horizon, *dimension)?;
                if let Some(c) = capacity {
                    rel = rel.with_capacity(*c);
                }
                (Box::new(rel), LossModel::square(*b), ComparatorFamily::linear(*dimension, *lambda))
            }
            RelaxationRequest::CondRad {
                table,
                loss,
                covariate_set,
                mean_grid,
                horizon,
            } => {
                let t = FiniteTable::new(table.clone())?;
                let model = LossModel::from_config(loss)?;
                let rel = CondRadRelaxation::new(t.clone(), model.clone(), covariate_set.clone(), mean_grid.clone(), *horizon)?;
                (Box::new(rel), model, ComparatorFamily::FiniteTable(t))
            }
        };
        let prediction = PredictionSet::of(&model);
        match &self.histories {
            Some(h) => check_admissibility(rel.as_ref(), &model, &family, &self.covariates, &self.outcome_grid, &prediction, h),
            None => check_admissibility_exhaustive(rel.as_ref(), &model, &family, &self.covariates, &self.outcome_grid, &prediction),
        }
    }
}

#[derive(Deserialize)]
struct TreeRequest {
    table: Vec<Vec<f64>>,
    /// Covariate tree, level by level.
    tree: Vec<Vec<usize>>,
    #[serde(default)]
    mu: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    c: Option<f64>,
    /// Offset taken from this loss's curvature minorant; zero when absent.
    #[serde(default)]
    loss: Option<LossConfig>,
    #[serde(default)]
    beta: Option<f64>,
    #[serde(default)]
    norm: Option<Norm>,
    #[serde(default)]
    scales: Option<Vec<f64>>,
    #[serde(default)]
    gamma: Option<f64>,
}

#[derive(Deserialize)]
struct FatRequest {
    table: Vec<Vec<f64>>,
    #[serde(default)]
    covariate_set: Option<Vec<usize>>,
    beta: f64,
    max_depth: usize,
}

#[derive(Deserialize)]
struct RatesRequest {
    p: f64,
    r: f64,
    n: usize,
    #[serde(default = "one")]
    g: f64,
    #[serde(default = "one")]
    k: f64,
    #[serde(rename = "R", default = "one")]
    big_r: f64,
    #[serde(default = "one")]
    c: f64,
}

#[derive(Deserialize)]
struct KhinchineRequest {
    k: Vec<usize>,
}

fn one() -> f64 {
    1.0
}

fn missing(what: &str) -> Error {
    Error::Config(format!("request needs field `{what}`"))
}

fn complexity(quantity: Quantity, config: Option<&Path>) -> Result<serde_json::Value, Error> {
    use serde_json::json;
    let path = || config.ok_or_else(|| Error::Config("--config is required for this quantity".into()));
    let tree_request = || -> Result<(TreeRequest, FiniteTable, LabeledTree<usize>), Error> {
        let req: TreeRequest = read_json(path()?)?;
        let table = FiniteTable::new(req.table.clone())?;
        let tree = LabeledTree::new(req.tree.clone())?;
        Ok((req, table, tree))
    };
    Ok(match quantity {
        Quantity::Rademacher => {
            let (_, table, x) = tree_request()?;
            json!({ "depth": x.depth(), "value": seq_rademacher(&table, &x)? })
        }
        Quantity::Offset => {
            let (req, table, x) = tree_request()?;
            let mu = match req.mu {
                Some(levels) => LabeledTree::new(levels)?,
                None => LabeledTree::constant(x.depth(), 0.0),
            };
            let c = req.c.ok_or_else(|| missing("c"))?;
            let model = req.loss.as_ref().map(LossModel::from_config).transpose()?;
            let offset = |d: f64| model.as_ref().map_or(0.0, |m| m.delta_lower_unchecked(d));
            json!({ "depth": x.depth(), "c": c, "value": offset_rademacher(&table, &x, &mu, c, &offset)? })
        }
        Quantity::Cover => {
            let (req, table, x) = tree_request()?;
            let beta = req.beta.ok_or_else(|| missing("beta"))?;
            serde_json::to_value(seq_cover_number(&table, &x, beta, req.norm.unwrap_or(Norm::L2))?)?
        }
        Quantity::Fat => {
            let req: FatRequest = read_json(path()?)?;
            let table = FiniteTable::new(req.table)?;
            let cov = req.covariate_set.unwrap_or_else(|| (0..table.covariate_count()).collect());
            serde_json::to_value(fat_shattering(&table, &cov, req.beta, req.max_depth, &[])?)?
        }
        Quantity::Dudley => {
            let (req, table, x) = tree_request()?;
            let scales = req.scales.ok_or_else(|| missing("scales"))?;
            let logs = scales
                .iter()
                .map(|&s| seq_cover_number(&table, &x, s, Norm::L2).map(|c| (c.size as f64).ln()))
                .collect::<Result<Vec<_>, _>>()?;
            let (value, rho) = dudley_bound_steps(&scales, &logs, x.depth(), req.gamma.unwrap_or(2.0))?;
            json!({ "value": value, "rho": rho, "scales": scales, "log_covers": logs, "rademacher": seq_rademacher(&table, &x)? })
        }
        Quantity::Rates => {
            let req: RatesRequest = read_json(path()?)?;
            json!({
                "upper": rate_upper(req.p, req.r, req.g, req.k, req.n, RateConstants::default())?,
                "lower": rate_lower(req.p, req.r, req.big_r, req.k, req.n, req.c)?,
            })
        }
        Quantity::Khinchine => {
            let ks = match config {
                Some(p) => read_json::<KhinchineRequest>(p)?.k,
                None => (1..=24).collect(),
            };
            let rows = ks
                .iter()
                .map(|&k| {
                    khinchine_check(k).map(|(v, ok)| json!({ "k": k, "expectation": v, "lower": (k as f64 / 2.0).sqrt(), "holds": ok }))
                })
                .collect::<Result<Vec<_>, _>>()?;
            serde_json::Value::Array(rows)
        }
    })
}
