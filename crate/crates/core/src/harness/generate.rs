//! Outcome sequences for experiments.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, GeneratorConfig};
use crate::comparators::{ComparatorFamily, Covariate};
use crate::complexity::fat_shattering;
use crate::forecasters::Forecaster;
use crate::minimax::Solver;
use crate::{Error, Result};

pub type Sequence = Vec<(Covariate, f64)>;

/// The generator behind every seeded stream.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_covariate(family: &ComparatorFamily, rng: &mut ChaCha8Rng) -> Covariate {
    match family {
        ComparatorFamily::FiniteTable(t) => Covariate::Id(rng.gen_range(0..t.covariate_count())),
        ComparatorFamily::SparseConvex(s) => Covariate::Id(rng.gen_range(0..s.base_values[0].len())),
        ComparatorFamily::Linear(l) => Covariate::Vector(unit_ball_point(l.dimension, rng)),
    }
}

/// Uniform draw from the closed unit ball by rejection.
pub fn unit_ball_point(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        if v.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
            return v;
        }
    }
}

/// The outcome sequence of `config`. Adaptive generators play against a
/// fresh instance of the configured forecaster.
pub fn generate_sequence(config: &ExperimentConfig) -> Result<Sequence> {
    config.validate()?;
    let model = config.model()?;
    let b = model.bound();
    let n = config.horizon;
    let mut rng = rng(config.seed);
    match &config.generator {
        GeneratorConfig::IidNoise { expert, noise } => {
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                let x = random_covariate(&config.family, &mut rng);
                let e = if *noise > 0.0 { rng.gen_range(-noise..=*noise) } else { 0.0 };
                let y = (config.family.evaluate(expert, &x)? + e).clamp(-b, b);
                out.push((x, y));
            }
            Ok(out)
        }
        GeneratorConfig::AdversarialOracle { game } => {
            let table = config.family.as_table()?;
            if let Some(&x) = game.covariate_set.iter().find(|&&x| x >= table.covariate_count()) {
                return Err(Error::Config(format!("game covariate {x} is not a covariate of the family")));
            }
            if game.horizon == 0 {
                return Err(Error::Config("adversarial game needs a positive horizon".into()));
            }
            let solver = Solver::new(game)?;
            let mut forecaster = config.build_forecaster()?;
            let mut out = Vec::with_capacity(n);
            let mut block: Vec<(usize, f64)> = Vec::new();
            while out.len() < n {
                if block.len() == game.horizon {
                    block.clear();
                }
                let x = solver.choose_covariate(&block)?;
                let cx = Covariate::Id(x);
                let yhat = forecaster.predict(&cx)?;
                let y = solver.choose_outcome(&block, x, model.prediction_range.clamp(yhat))?;
                forecaster.observe(&cx, y)?;
                block.push((x, y));
                out.push((cx, y));
            }
            Ok(out)
        }
        GeneratorConfig::ShatteringAdversary { beta, max_depth } => {
            let table = config.family.as_table()?;
            let all: Vec<usize> = (0..table.covariate_count()).collect();
            let report = fat_shattering(table, &all, *beta, max_depth.unwrap_or(n.clamp(1, 8)), &[])?;
            let cert = report
                .certificate
                .ok_or_else(|| Error::Config(format!("no tree is shattered at scale {beta}; no certificate to walk")))?;
            let mut out = Vec::with_capacity(n);
            let (mut level, mut node) = (1, 0);
            while out.len() < n {
                let x = *cert.covariate_tree.node(level, node);
                let s = *cert.witness.node(level, node);
                let (y1, y2) = model
                    .two_point_witness(s)
                    .ok_or_else(|| Error::Config(format!("loss has no two-point witness at {s}")))?;
                let up = rng.gen_bool(0.5);
                out.push((Covariate::Id(x), if up { y2 } else { y1 }));
                if level == cert.depth {
                    (level, node) = (1, 0);
                } else {
                    (level, node) = (level + 1, 2 * node + usize::from(up));
                }
            }
            Ok(out)
        }
        GeneratorConfig::BestResponse => {
            let table = config.family.as_table()?;
            let mut forecaster = config.build_forecaster()?;
            let mut losses = vec![0.0; table.len()];
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                let before = losses.iter().copied().fold(f64::INFINITY, f64::min);
                let mut best: Option<(f64, usize, f64)> = None;
                for x in 0..table.covariate_count() {
                    let yhat = forecaster.predict(&Covariate::Id(x))?;
                    for y in [-b, b] {
                        let after = (0..table.len())
                            .map(|f| losses[f] + model.value_unchecked(table.values[f][x], y))
                            .fold(f64::INFINITY, f64::min);
                        let gain = model.value(yhat, y)? - (after - before);
                        if best.map_or(true, |(g, _, _)| gain > g) {
                            best = Some((gain, x, y));
                        }
                    }
                }
                let (_, x, y) = best.expect("nonempty table");
                let cx = Covariate::Id(x);
                forecaster.predict(&cx)?;
                forecaster.observe(&cx, y)?;
                for (f, l) in losses.iter_mut().enumerate() {
                    *l += model.value_unchecked(table.values[f][x], y);
                }
                out.push((cx, y));
            }
            Ok(out)
        }
        GeneratorConfig::Replay { path } => {
            let mut seq = load_sequence(path)?;
            if seq.len() < n {
                return Err(Error::Config(format!(
                    "{} holds {} rounds, horizon is {n}",
                    path.display(),
                    seq.len()
                )));
            }
            seq.truncate(n);
            Ok(seq)
        }
    }
}

/// Reads JSON lines carrying `x` and `y` fields (round logs qualify).
pub fn load_sequence(path: &Path) -> Result<Sequence> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v: serde_json::Value = serde_json::from_str(line)?;
        let x = v
            .get("x")
            .ok_or_else(|| Error::Config(format!("{}:{}: missing field x", path.display(), i + 1)))?;
        let y = v
            .get("y")
            .and_then(serde_json::Value::as_f64)
            .ok_or_else(|| Error::Config(format!("{}:{}: missing numeric field y", path.display(), i + 1)))?;
        out.push((serde_json::from_value(x.clone())?, y));
    }
    Ok(out)
}

pub fn save_sequence(path: &Path, seq: &[(Covariate, f64)]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for (x, y) in seq {
        let line = serde_json::json!({ "x": x, "y": y });
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comparators::Predictor;
    use crate::harness::config::{ForecasterConfig, OutputConfig};
    use crate::losses::LossModel;
    use crate::minimax::GameSpec;

    fn config(generator: GeneratorConfig, family: ComparatorFamily, b: f64) -> ExperimentConfig {
        ExperimentConfig {
            seed: 7,
            loss: LossModel::square(b).to_config(),
            family,
            forecaster: ForecasterConfig::Experts { temperature: None },
            generator,
            horizon: 40,
            output: OutputConfig::default(),
        }
    }

    #[test]
    fn noiseless_outcomes_follow_the_expert() {
        let fam = ComparatorFamily::finite(vec![vec![0.1, -0.3, 0.7], vec![0.0, 0.0, 0.0]]).unwrap();
        let cfg = config(
            GeneratorConfig::IidNoise {
                expert: Predictor::Index(0),
                noise: 0.0,
            },
            fam.clone(),
            1.0,
        );
        let seq = generate_sequence(&cfg).unwrap();
        assert_eq!(seq.len(), 40);
        for (x, y) in &seq {
            assert_eq!(*y, fam.evaluate(&Predictor::Index(0), x).unwrap());
        }
        assert_eq!(seq, generate_sequence(&cfg).unwrap());
    }

    #[test]
    fn shattering_walk_follows_certificate() {
        let fam = ComparatorFamily::finite(vec![vec![1.0], vec![-1.0]]).unwrap();
        let cfg = config(
            GeneratorConfig::ShatteringAdversary {
                beta: 2.0,
                max_depth: None,
            },
            fam,
            2.0,
        );
        let seq = generate_sequence(&cfg).unwrap();
        assert!(seq.iter().all(|(x, y)| *x == Covariate::Id(0) && (*y == 2.0 || *y == -2.0)));
        assert!(seq.iter().any(|p| p.1 > 0.0) && seq.iter().any(|p| p.1 < 0.0));
    }

    #[test]
    fn missing_certificate_is_a_config_error() {
        let fam = ComparatorFamily::finite(vec![vec![0.5]]).unwrap();
        let cfg = config(
            GeneratorConfig::ShatteringAdversary {
                beta: 0.5,
                max_depth: None,
            },
            fam,
            1.0,
        );
        assert!(matches!(generate_sequence(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn oracle_repeats_game_blocks() {
        let values = vec![vec![1.0, 0.0], vec![-1.0, 0.5]];
        let model = LossModel::square(1.0);
        let game = GameSpec::new(
            crate::comparators::FiniteTable::new(values.clone()).unwrap(),
            &model,
            2,
            vec![0, 1],
            vec![-1.0, 1.0],
            vec![-1.0, 0.0, 1.0],
        )
        .unwrap();
        let cfg = config(GeneratorConfig::AdversarialOracle { game }, ComparatorFamily::finite(values).unwrap(), 1.0);
        let seq = generate_sequence(&cfg).unwrap();
        assert_eq!(seq.len(), 40);
        assert!(seq.iter().all(|(_, y)| y.abs() == 1.0));
    }

    #[test]
    fn replay_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("seq.jsonl");
        let seq = vec![(Covariate::Id(1), 0.25), (Covariate::Vector(vec![0.5, -0.5]), -1.0)];
        save_sequence(&p, &seq).unwrap();
        assert_eq!(load_sequence(&p).unwrap(), seq);
    }
}
