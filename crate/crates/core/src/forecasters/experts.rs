//! Finite classes under square loss: the log-partition relaxation and the
//! forecaster it induces.

use serde_json::json;

use super::relaxation::{clip, RelaxationMeta, RelaxationOracle};
use super::Forecaster;
use crate::comparators::{Covariate, FiniteTable};
use crate::numeric::log_sum_exp;
use crate::{Error, Result};

fn check_table(table: &FiniteTable, b: f64) -> Result<()> {
    if !(b > 0.0) {
        return Err(Error::Domain {
            what: "outcome bound B",
            value: b,
            interval: "(0, inf)".into(),
        });
    }
    if table.is_empty() {
        return Err(Error::InvalidArgument("experts need a nonempty family".into()));
    }
    let r = table.output_range();
    if r.lo < -b || r.hi > b {
        return Err(Error::Domain {
            what: "expert prediction",
            value: if r.hi > b { r.hi } else { r.lo },
            interval: format!("[{}, {}]", -b, b),
        });
    }
    Ok(())
}

/// `T log Σ_f exp(−T^{−1} Σ_j (f(x_j) − y_j)²)`.
///
/// The temperature `T = B²` gives the textbook potential. Admissibility
/// needs the mixability temperature `2B²`.
#[derive(Debug, Clone)]
pub struct ExpertsRelaxation {
    pub table: FiniteTable,
    pub b: f64,
    pub temperature: f64,
    pub horizon: usize,
}

impl ExpertsRelaxation {
    pub fn new(table: FiniteTable, b: f64, horizon: usize) -> Result<Self> {
        Self::with_temperature(table, b, b * b, horizon)
    }

    pub fn with_temperature(table: FiniteTable, b: f64, temperature: f64, horizon: usize) -> Result<Self> {
        check_table(&table, b)?;
        if !(temperature > 0.0) {
            return Err(Error::Domain {
                what: "temperature",
                value: temperature,
                interval: "(0, inf)".into(),
            });
        }
        Ok(ExpertsRelaxation {
            table,
            b,
            temperature,
            horizon,
        })
    }
}

impl RelaxationOracle for ExpertsRelaxation {
    fn meta(&self) -> RelaxationMeta {
        RelaxationMeta {
            name: "experts".into(),
            family: format!("finite table of {} experts", self.table.len()),
            model: format!("square loss, B = {}", self.b),
            parameters: json!({ "temperature": self.temperature, "horizon": self.horizon }),
        }
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn evaluate(&self, xs: &[Covariate], ys: &[f64]) -> Result<f64> {
        let xs = xs.iter().map(Covariate::id).collect::<Result<Vec<_>>>()?;
        let h: Vec<(usize, f64)> = xs.into_iter().zip(ys.iter().copied()).collect();
        experts_potential(&self.table, self.temperature, &h)
    }
}

fn experts_potential(table: &FiniteTable, temperature: f64, history: &[(usize, f64)]) -> Result<f64> {
    let mut exps = Vec::with_capacity(table.len());
    for f in 0..table.len() {
        let mut l = 0.0;
        for &(x, y) in history {
            let d = table.value(f, x)? - y;
            l += d * d;
        }
        exps.push(-l / temperature);
    }
    Ok(temperature * log_sum_exp(&exps))
}

/// `B² log Σ_f exp(−B^{−2} Σ_{j≤t} (f(x_j) − y_j)²)`.
pub fn experts_relaxation(table: &FiniteTable, b: f64, history: &[(usize, f64)]) -> Result<f64> {
    check_table(table, b)?;
    experts_potential(table, b * b, history)
}

/// `Clip((T/(4B)) log [Σ_f e^{−(L_f + (f(x_t) − B)²)/T} / Σ_f e^{−(L_f + (f(x_t) + B)²)/T}])`
/// from cumulative losses `L_f`.
fn forecast_from_losses(table: &FiniteTable, b: f64, temperature: f64, losses: &[f64], x: usize) -> Result<f64> {
    let mut up = Vec::with_capacity(losses.len());
    let mut down = Vec::with_capacity(losses.len());
    for (f, l) in losses.iter().enumerate() {
        let v = table.value(f, x)?;
        up.push(-(l + (v - b) * (v - b)) / temperature);
        down.push(-(l + (v + b) * (v + b)) / temperature);
    }
    Ok(clip(temperature / (4.0 * b) * (log_sum_exp(&up) - log_sum_exp(&down)), b))
}

/// The experts forecast at `x_t` after `history`, temperature `B²`.
pub fn experts_forecast(table: &FiniteTable, b: f64, history: &[(usize, f64)], x_t: usize) -> Result<f64> {
    check_table(table, b)?;
    let mut losses = vec![0.0; table.len()];
    for &(x, y) in history {
        for (f, l) in losses.iter_mut().enumerate() {
            let d = table.value(f, x)? - y;
            *l += d * d;
        }
    }
    forecast_from_losses(table, b, b * b, &losses, x_t)
}

/// Online form of [`experts_forecast`] keeping cumulative losses.
#[derive(Debug, Clone)]
pub struct ExpertsForecaster {
    table: FiniteTable,
    b: f64,
    temperature: f64,
    losses: Vec<f64>,
}

impl ExpertsForecaster {
    pub fn new(table: FiniteTable, b: f64) -> Result<Self> {
        Self::with_temperature(table, b, b * b)
    }

    pub fn with_temperature(table: FiniteTable, b: f64, temperature: f64) -> Result<Self> {
        let r = ExpertsRelaxation::with_temperature(table, b, temperature, 0)?;
        Ok(ExpertsForecaster {
            losses: vec![0.0; r.table.len()],
            table: r.table,
            b,
            temperature,
        })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }
}

impl Forecaster for ExpertsForecaster {
    fn name(&self) -> String {
        format!("experts(T = {})", self.temperature)
    }

    fn predict(&mut self, x: &Covariate) -> Result<f64> {
        forecast_from_losses(&self.table, self.b, self.temperature, &self.losses, x.id()?)
    }

    fn observe(&mut self, x: &Covariate, y: f64) -> Result<()> {
        let x = x.id()?;
        for (f, l) in self.losses.iter_mut().enumerate() {
            let d = self.table.value(f, x)? - y;
            *l += d * d;
        }
        Ok(())
    }
}

/// Exponentially weighted average of expert predictions with learning rate
/// `eta` on square loss.
#[derive(Debug, Clone)]
pub struct ExponentialWeights {
    table: FiniteTable,
    eta: f64,
    log_weights: Vec<f64>,
}

impl ExponentialWeights {
    pub fn new(table: FiniteTable, eta: f64) -> Result<Self> {
        if table.is_empty() || !(eta >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "exponential weights need a nonempty family and eta >= 0, got eta = {eta}"
            )));
        }
        Ok(ExponentialWeights {
            log_weights: vec![0.0; table.len()],
            table,
            eta,
        })
    }
}

impl Forecaster for ExponentialWeights {
    fn name(&self) -> String {
        format!("exponential weights(eta = {})", self.eta)
    }

    fn predict(&mut self, x: &Covariate) -> Result<f64> {
        let x = x.id()?;
        let z = log_sum_exp(&self.log_weights);
        let mut p = 0.0;
        for (f, w) in self.log_weights.iter().enumerate() {
            p += (w - z).exp() * self.table.value(f, x)?;
        }
        Ok(p)
    }

    fn observe(&mut self, x: &Covariate, y: f64) -> Result<()> {
        let x = x.id()?;
        for (f, w) in self.log_weights.iter_mut().enumerate() {
            let d = self.table.value(f, x)? - y;
            *w -= self.eta * d * d;
        }
        Ok(())
    }
}
