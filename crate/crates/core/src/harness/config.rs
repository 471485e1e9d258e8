//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::comparators::{ComparatorFamily, Predictor};
use crate::forecasters::{
    CondRadRelaxation, ComparatorForecaster, ExpertsForecaster, ExponentialWeights, Forecaster,
    RegretBoundParams, RelaxationForecaster, RelaxationOracle, VawForecaster, regret_bound,
};
use crate::losses::{LossConfig, LossModel};
use crate::minimax::GameSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForecasterConfig {
    /// Temperature defaults to `B²`.
    Experts {
        #[serde(default)]
        temperature: Option<f64>,
    },
    Vaw { lambda: f64 },
    ExponentialWeights { eta: f64 },
    Comparator { predictor: Predictor },
    /// Toy scale only: every forecast solves a tree supremum.
    CondRad { covariate_set: Vec<usize>, mean_grid: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorConfig {
    /// `y_t = clamp(f(x_t) + U[−noise, noise])` with uniformly drawn `x_t`.
    IidNoise { expert: Predictor, noise: f64 },
    /// The optimal adversary of a tiny game, restarted every `game.horizon`
    /// rounds.
    AdversarialOracle { game: GameSpec },
    /// Walks a `β`-shattered tree with fair coin flips, restarting at the
    /// root when a leaf is reached.
    ShatteringAdversary {
        beta: f64,
        #[serde(default)]
        max_depth: Option<usize>,
    },
    /// Greedy one-step maximizer of the regret increment over the covariates
    /// of a finite family and outcomes `{−B, B}`.
    BestResponse,
    Replay { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Json, OutputFormat::Csv]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("out"),
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub loss: LossConfig,
    pub family: ComparatorFamily,
    pub forecaster: ForecasterConfig,
    pub generator: GeneratorConfig,
    pub horizon: usize,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_json(&text)
    }

    pub fn model(&self) -> Result<LossModel> {
        LossModel::from_config(&self.loss)
    }

    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        let model = self.model()?;
        match (&self.forecaster, &self.family) {
            (ForecasterConfig::Experts { .. } | ForecasterConfig::CondRad { .. }, ComparatorFamily::FiniteTable(_)) => {}
            (ForecasterConfig::ExponentialWeights { .. }, ComparatorFamily::FiniteTable(_)) => {}
            (ForecasterConfig::Vaw { .. }, ComparatorFamily::Linear(_)) => {}
            (ForecasterConfig::Comparator { .. }, _) => {}
            (f, _) => {
                return Err(Error::Config(format!("forecaster {f:?} does not fit the configured family")));
            }
        }
        if matches!(self.forecaster, ForecasterConfig::Experts { .. } | ForecasterConfig::Vaw { .. }) && !model.is_square() {
            return Err(Error::Config("experts and vaw forecasters need square loss".into()));
        }
        if let GeneratorConfig::IidNoise { noise, .. } = self.generator {
            if !(noise >= 0.0) {
                return Err(Error::Config(format!("noise level {noise} must be >= 0")));
            }
        }
        Ok(())
    }

    /// A fresh forecaster for this experiment.
    pub fn build_forecaster(&self) -> Result<Box<dyn Forecaster>> {
        let model = self.model()?;
        let b = model.bound();
        Ok(match &self.forecaster {
            ForecasterConfig::Experts { temperature } => {
                let t = self.family.as_table()?.clone();
                Box::new(ExpertsForecaster::with_temperature(t, b, temperature.unwrap_or(b * b))?)
            }
            ForecasterConfig::Vaw { lambda } => match &self.family {
                ComparatorFamily::Linear(l) => Box::new(VawForecaster::new(l.dimension, *lambda, b)?),
                _ => return Err(Error::Config("vaw needs a linear family".into())),
            },
            ForecasterConfig::ExponentialWeights { eta } => {
                Box::new(ExponentialWeights::new(self.family.as_table()?.clone(), *eta)?)
            }
            ForecasterConfig::Comparator { predictor } => Box::new(ComparatorForecaster {
                family: self.family.clone(),
                predictor: predictor.clone(),
            }),
            ForecasterConfig::CondRad { covariate_set, mean_grid } => {
                let rel = self.cond_rad(covariate_set, mean_grid)?;
                Box::new(RelaxationForecaster::new(rel, model))
            }
        })
    }

    fn cond_rad(&self, covariate_set: &[usize], mean_grid: &[f64]) -> Result<CondRadRelaxation> {
        CondRadRelaxation::new(
            self.family.as_table()?.clone(),
            self.model()?,
            covariate_set.to_vec(),
            mean_grid.to_vec(),
            self.horizon,
        )
    }

    /// The regret guarantee of the configured forecaster, when it has one.
    pub fn regret_bound(&self) -> Result<Option<f64>> {
        let model = self.model()?;
        let b = model.bound();
        match &self.forecaster {
            ForecasterConfig::Experts { temperature } => Ok(Some(regret_bound(RegretBoundParams::Experts {
                b,
                size: self.family.as_table()?.len(),
                temperature: *temperature,
            })?)),
            ForecasterConfig::Vaw { lambda } => match &self.family {
                ComparatorFamily::Linear(l) if self.horizon as f64 >= lambda * l.dimension as f64 => {
                    Ok(Some(regret_bound(RegretBoundParams::Vaw {
                        n: self.horizon,
                        d: l.dimension,
                        b,
                        lambda: *lambda,
                    })?))
                }
                _ => Ok(None),
            },
            ForecasterConfig::CondRad { covariate_set, mean_grid } => {
                Ok(Some(self.cond_rad(covariate_set, mean_grid)?.evaluate(&[], &[])?))
            }
            _ => Ok(None),
        }
    }
}
