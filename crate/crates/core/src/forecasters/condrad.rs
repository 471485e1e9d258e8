//! Conditional offset Rademacher relaxation for finite tables.
//!
//! Each evaluation solves a supremum over covariate and mean trees for the
//! remaining rounds, so this is for toy horizons only.

use serde_json::json;

use super::relaxation::{RelaxationMeta, RelaxationOracle};
use crate::comparators::{Covariate, FiniteTable};
use crate::complexity::offset_rademacher_sup_biased;
use crate::losses::LossModel;
use crate::{Error, Result};

/// `sup_{x, μ} E max_f [Σ_{j>t} 2G ε_j (f(x_j) − μ_j) − Δ̲(f(x_j) − μ_j) − Σ_{j≤t} ℓ(f(x_j), y_j)]`
/// with tree labels drawn from `covariate_set` and `mean_grid`.
#[derive(Debug, Clone)]
pub struct CondRadRelaxation {
    pub table: FiniteTable,
    pub model: LossModel,
    pub covariate_set: Vec<usize>,
    pub mean_grid: Vec<f64>,
    pub horizon: usize,
}

impl CondRadRelaxation {
    pub fn new(table: FiniteTable, model: LossModel, covariate_set: Vec<usize>, mean_grid: Vec<f64>, horizon: usize) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::InvalidArgument("relaxation needs a nonempty family".into()));
        }
        Ok(CondRadRelaxation {
            table,
            model,
            covariate_set,
            mean_grid,
            horizon,
        })
    }
}

impl RelaxationOracle for CondRadRelaxation {
    fn meta(&self) -> RelaxationMeta {
        RelaxationMeta {
            name: "conditional offset rademacher".into(),
            family: format!("finite table of {} predictors", self.table.len()),
            model: format!("{:?}, B = {}", self.model.kind, self.model.bound()),
            parameters: json!({
                "horizon": self.horizon,
                "covariate_set": self.covariate_set,
                "mean_grid": self.mean_grid,
                "toy_scale_only": true,
            }),
        }
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn evaluate(&self, xs: &[Covariate], ys: &[f64]) -> Result<f64> {
        if xs.len() > self.horizon {
            return Err(Error::Protocol(format!("history longer than horizon {}", self.horizon)));
        }
        let mut bias = vec![0.0; self.table.len()];
        for (x, &y) in xs.iter().zip(ys) {
            let x = x.id()?;
            for (f, b) in bias.iter_mut().enumerate() {
                *b += self.model.value(self.table.value(f, x)?, y)?;
            }
        }
        let model = &self.model;
        let offset = move |d: f64| model.delta_lower_unchecked(d);
        let sup = offset_rademacher_sup_biased(
            &self.table,
            &self.covariate_set,
            &self.mean_grid,
            self.horizon - xs.len(),
            model.grad_bound,
            &offset,
            &bias,
        )?;
        Ok(sup.value)
    }
}
