//! Relaxation-based forecasters and regret accounting.

mod condrad;
mod experts;
mod relaxation;
mod vaw;

use serde::{Deserialize, Serialize};

use crate::comparators::{ComparatorFamily, Covariate, Predictor};
use crate::losses::LossModel;
use crate::{Error, Result};

pub use condrad::CondRadRelaxation;
pub use experts::{experts_forecast, experts_relaxation, ExpertsForecaster, ExpertsRelaxation, ExponentialWeights};
pub use relaxation::{
    argmin_forecast, check_admissibility, check_admissibility_exhaustive, clip, relaxation_forecast, AdmissibilityReport,
    PredictionSet, RelaxationMeta, RelaxationOracle, RoundMargin, ShiftedAtHorizon, Violation, ViolationKind,
    ZeroRelaxation, ADMISSIBILITY_TOL, RECIPE_POINTS,
};
pub use vaw::{vaw_forecast, vaw_relaxation, VawCapacity, VawForecaster, VawRelaxation};

/// A sequential prediction strategy: `predict` then `observe`, once per round.
pub trait Forecaster {
    fn name(&self) -> String;
    fn predict(&mut self, x: &Covariate) -> Result<f64>;
    fn observe(&mut self, x: &Covariate, y: f64) -> Result<()>;
}

impl<F: Forecaster + ?Sized> Forecaster for Box<F> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn predict(&mut self, x: &Covariate) -> Result<f64> {
        (**self).predict(x)
    }
    fn observe(&mut self, x: &Covariate, y: f64) -> Result<()> {
        (**self).observe(x, y)
    }
}

/// The generic forecaster driven by any relaxation.
pub struct RelaxationForecaster<R> {
    pub relaxation: R,
    pub model: LossModel,
    pub prediction: PredictionSet,
    pub outcome_grid: Vec<f64>,
    history: Vec<(Covariate, f64)>,
}

impl<R: RelaxationOracle> RelaxationForecaster<R> {
    /// Predictions range over the model's prediction range and the inner
    /// supremum over `{−B, B}`.
    pub fn new(relaxation: R, model: LossModel) -> Self {
        let b = model.bound();
        RelaxationForecaster {
            relaxation,
            prediction: PredictionSet::of(&model),
            model,
            outcome_grid: vec![-b, b],
            history: Vec::new(),
        }
    }

    pub fn with_grids(mut self, prediction: PredictionSet, outcome_grid: Vec<f64>) -> Self {
        self.prediction = prediction;
        self.outcome_grid = outcome_grid;
        self
    }
}

impl<R: RelaxationOracle> Forecaster for RelaxationForecaster<R> {
    fn name(&self) -> String {
        format!("relaxation({})", self.relaxation.meta().name)
    }

    fn predict(&mut self, x: &Covariate) -> Result<f64> {
        relaxation_forecast(&self.relaxation, &self.model, &self.history, x, &self.prediction, &self.outcome_grid)
    }

    fn observe(&mut self, x: &Covariate, y: f64) -> Result<()> {
        self.history.push((x.clone(), y));
        Ok(())
    }
}

/// Plays a fixed member of a family.
pub struct ComparatorForecaster {
    pub family: ComparatorFamily,
    pub predictor: Predictor,
}

impl Forecaster for ComparatorForecaster {
    fn name(&self) -> String {
        format!("comparator({:?})", self.predictor)
    }

    fn predict(&mut self, x: &Covariate) -> Result<f64> {
        self.family.evaluate(&self.predictor, x)
    }

    fn observe(&mut self, _: &Covariate, _: f64) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub x: Covariate,
    pub yhat: f64,
    pub y: f64,
    pub loss: f64,
    pub cumulative_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineRun {
    pub records: Vec<RoundRecord>,
    pub regret: f64,
}

/// A run stopped by an error, with the rounds completed before it.
#[derive(Debug)]
pub struct RunAborted {
    pub records: Vec<RoundRecord>,
    pub error: Error,
}

impl std::fmt::Display for RunAborted {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run aborted after {} rounds: {}", self.records.len(), self.error)
    }
}

impl std::error::Error for RunAborted {}

/// Plays `forecaster` through `sequence`, logging cumulative regret against
/// the best member of `family` on each prefix.
pub fn run_online(
    forecaster: &mut dyn Forecaster,
    sequence: &[(Covariate, f64)],
    model: &LossModel,
    family: &ComparatorFamily,
) -> std::result::Result<OnlineRun, RunAborted> {
    let mut records = Vec::with_capacity(sequence.len());
    let mut tracker = family.tracker(model);
    let mut total = 0.0;
    for (i, (x, y)) in sequence.iter().enumerate() {
        let step = (|| -> Result<RoundRecord> {
            let yhat = forecaster.predict(x)?;
            let loss = model.value(yhat, *y)?;
            forecaster.observe(x, *y)?;
            tracker.push(x, *y)?;
            total += loss;
            Ok(RoundRecord {
                t: i + 1,
                x: x.clone(),
                yhat,
                y: *y,
                loss,
                cumulative_regret: total - tracker.best_loss()?,
            })
        })();
        match step {
            Ok(r) => records.push(r),
            Err(error) => return Err(RunAborted { records, error }),
        }
    }
    let regret = records.last().map_or(0.0, |r| r.cumulative_regret);
    Ok(OnlineRun { records, regret })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegretBoundParams {
    /// `T log|ℱ|`, `T = B²` unless given.
    Experts {
        b: f64,
        size: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        temperature: Option<f64>,
    },
    /// `4dB² log(n/(λd))`, the ridge term excluded.
    Vaw { n: usize, d: usize, b: f64, lambda: f64 },
}

pub fn regret_bound(params: RegretBoundParams) -> Result<f64> {
    match params {
        RegretBoundParams::Experts { b, size, temperature } => {
            if size == 0 {
                return Err(Error::Domain {
                    what: "class size",
                    value: 0.0,
                    interval: "[1, inf)".into(),
                });
            }
            Ok(temperature.unwrap_or(b * b) * (size as f64).ln())
        }
        RegretBoundParams::Vaw { n, d, b, lambda } => {
            let arg = n as f64 / (lambda * d as f64);
            if !(arg > 0.0) || arg < 1.0 || d == 0 {
                return Err(Error::Domain {
                    what: "n / (lambda d)",
                    value: arg,
                    interval: "[1, inf)".into(),
                });
            }
            Ok(4.0 * d as f64 * b * b * arg.ln())
        }
    }
}

/// `(1/n) Σ (fᵀx_t − y_t)² + λ‖f‖²/(2n) + 4dB² log(n/(λd))/n`, the
/// per-round guarantee of the ridge forecaster against `f`.
pub fn vaw_comparator_bound(sequence: &[(Vec<f64>, f64)], f: &[f64], lambda: f64, b: f64) -> Result<f64> {
    let n = sequence.len();
    let d = f.len();
    let mut loss = 0.0;
    for (x, y) in sequence {
        if x.len() != d {
            return Err(Error::Shape(format!("covariate of length {} in dimension {d}", x.len())));
        }
        let r = crate::linalg::dot(f, x) - y;
        loss += r * r;
    }
    let norm2 = crate::linalg::dot(f, f);
    let nf = n as f64;
    let slack = regret_bound(RegretBoundParams::Vaw { n, d, b, lambda })?;
    Ok(loss / nf + lambda * norm2 / (2.0 * nf) + slack / nf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comparators::FiniteTable;

    #[test]
    fn bound_examples() {
        let e = regret_bound(RegretBoundParams::Experts {
            b: 1.0,
            size: 3,
            temperature: None,
        })
        .unwrap();
        assert!((e - 3f64.ln()).abs() < 1e-15);
        let e = regret_bound(RegretBoundParams::Experts {
            b: 2.0,
            size: 10,
            temperature: None,
        })
        .unwrap();
        assert!((e - 4.0 * 10f64.ln()).abs() < 1e-12);
        let v = regret_bound(RegretBoundParams::Vaw {
            n: 100,
            d: 1,
            b: 1.0,
            lambda: 1.0,
        })
        .unwrap();
        assert!((v - 4.0 * 100f64.ln()).abs() < 1e-12);
        assert!(regret_bound(RegretBoundParams::Vaw {
            n: 1,
            d: 2,
            b: 1.0,
            lambda: 1.0
        })
        .is_err());
    }

    #[test]
    fn comparator_mimic_has_zero_regret() {
        let fam = ComparatorFamily::finite(vec![vec![0.2, -0.4, 0.9]]).unwrap();
        let model = LossModel::square(1.0);
        let mut f = ComparatorForecaster {
            family: fam.clone(),
            predictor: Predictor::Index(0),
        };
        let seq: Vec<(Covariate, f64)> = (0..20).map(|i| (Covariate::Id(i % 3), if i % 2 == 0 { 1.0 } else { -0.5 })).collect();
        let run = run_online(&mut f, &seq, &model, &fam).unwrap();
        assert!(run.records.iter().all(|r| r.cumulative_regret.abs() < 1e-12));
        assert_eq!(run.regret, run.records.last().unwrap().cumulative_regret);
    }

    #[test]
    fn regret_recorded_per_prefix() {
        let table = FiniteTable::new(vec![vec![1.0], vec![-1.0]]).unwrap();
        let fam = ComparatorFamily::FiniteTable(table.clone());
        let model = LossModel::square(1.0);
        let mut f = ExpertsForecaster::new(table, 1.0).unwrap();
        let seq = vec![(Covariate::Id(0), 1.0), (Covariate::Id(0), -1.0), (Covariate::Id(0), 1.0)];
        let run = run_online(&mut f, &seq, &model, &fam).unwrap();
        for (i, r) in run.records.iter().enumerate() {
            let prefix = &seq[..=i];
            let best = fam.best_comparator_loss(&model, prefix).unwrap();
            let total: f64 = run.records[..=i].iter().map(|r| r.loss).sum();
            assert!((r.cumulative_regret - (total - best)).abs() < 1e-12);
        }
    }

    #[test]
    fn failure_keeps_partial_log() {
        let fam = ComparatorFamily::finite(vec![vec![0.0, 0.0]]).unwrap();
        let model = LossModel::square(1.0);
        let mut f = ComparatorForecaster {
            family: fam.clone(),
            predictor: Predictor::Index(0),
        };
        let seq = vec![(Covariate::Id(0), 0.5), (Covariate::Id(7), 0.5)];
        let err = run_online(&mut f, &seq, &model, &fam).unwrap_err();
        assert_eq!(err.records.len(), 1);
        assert!(matches!(err.error, Error::Lookup(_)));
    }

    #[test]
    fn empty_sequence_has_zero_regret() {
        let fam = ComparatorFamily::finite(vec![vec![0.0]]).unwrap();
        let mut f = ExponentialWeights::new(fam.as_table().unwrap().clone(), 0.5).unwrap();
        let run = run_online(&mut f, &[], &LossModel::square(1.0), &fam).unwrap();
        assert!(run.records.is_empty());
        assert_eq!(run.regret, 0.0);
    }
}
