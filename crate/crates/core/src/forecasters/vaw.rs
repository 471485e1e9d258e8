//! Online ridge regression: the log-determinant relaxation and the
//! Vovk-Azoury-Warmuth forecaster.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::relaxation::{clip, RelaxationMeta, RelaxationOracle};
use super::Forecaster;
use crate::comparators::Covariate;
use crate::linalg::{Cholesky, Matrix};
use crate::{Error, Result};

fn check_params(lambda: f64, b: f64, d: usize) -> Result<()> {
    if !(lambda > 0.0) {
        return Err(Error::Domain {
            what: "ridge parameter lambda",
            value: lambda,
            interval: "(0, inf)".into(),
        });
    }
    if !(b > 0.0) {
        return Err(Error::Domain {
            what: "outcome bound B",
            value: b,
            interval: "(0, inf)".into(),
        });
    }
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    Ok(())
}

fn check_dim(x: &[f64], d: usize) -> Result<()> {
    if x.len() == d {
        Ok(())
    } else {
        Err(Error::Shape(format!("covariate of length {} in dimension {d}", x.len())))
    }
}

/// `Clip(x_tᵀ (Σ_{j≤t} x_j x_jᵀ + λI)^{−1} Σ_{j<t} y_j x_j)`.
pub fn vaw_forecast(history: &[(Vec<f64>, f64)], x_t: &[f64], lambda: f64, b: f64) -> Result<f64> {
    let d = x_t.len();
    check_params(lambda, b, d)?;
    let mut a = Matrix::scaled_identity(d, lambda);
    let mut s = vec![0.0; d];
    for (x, y) in history {
        check_dim(x, d)?;
        a.add_outer(x, 1.0);
        for (si, xi) in s.iter_mut().zip(x) {
            *si += y * xi;
        }
    }
    a.add_outer(x_t, 1.0);
    let w = Cholesky::factor(&a)?.solve(&s);
    Ok(clip(crate::linalg::dot(x_t, &w), b))
}

/// Capacity term `c` in `4B² (c − log det A)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VawCapacity {
    /// `d log(n/d)`.
    Textbook,
    /// `d log(λ + n/d)`, an upper bound on `log det A_n` whenever
    /// `‖x_t‖ ≤ 1`, so that the initial condition holds.
    Trace,
}

/// `‖Σ y_j z_j‖²_{A^{−1}} + 4B² log((n/d)^d / det A) − Σ y_j²` with
/// `A = Σ z_j z_jᵀ + λI`.
#[derive(Debug, Clone)]
pub struct VawRelaxation {
    pub lambda: f64,
    pub b: f64,
    pub horizon: usize,
    pub dimension: usize,
    pub capacity: VawCapacity,
}

impl VawRelaxation {
    pub fn new(lambda: f64, b: f64, horizon: usize, dimension: usize) -> Result<Self> {
        check_params(lambda, b, dimension)?;
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        Ok(VawRelaxation {
            lambda,
            b,
            horizon,
            dimension,
            capacity: VawCapacity::Textbook,
        })
    }

    pub fn with_capacity(mut self, capacity: VawCapacity) -> Self {
        self.capacity = capacity;
        self
    }

    fn log_capacity(&self) -> f64 {
        let (n, d) = (self.horizon as f64, self.dimension as f64);
        match self.capacity {
            VawCapacity::Textbook => d * (n / d).ln(),
            VawCapacity::Trace => d * (self.lambda + n / d).ln(),
        }
    }

    fn value<'a>(&self, pairs: impl Iterator<Item = (&'a [f64], f64)>) -> Result<f64> {
        let d = self.dimension;
        let mut a = Matrix::scaled_identity(d, self.lambda);
        let mut s = vec![0.0; d];
        let mut yy = 0.0;
        for (z, y) in pairs {
            check_dim(z, d)?;
            a.add_outer(z, 1.0);
            for (si, zi) in s.iter_mut().zip(z) {
                *si += y * zi;
            }
            yy += y * y;
        }
        let chol = Cholesky::factor(&a)?;
        Ok(chol.inverse_quadratic_form(&s) + 4.0 * self.b * self.b * (self.log_capacity() - chol.log_det()) - yy)
    }
}

/// The relaxation value on a history of `(z_j, y_j)` pairs.
pub fn vaw_relaxation(history: &[(Vec<f64>, f64)], lambda: f64, b: f64, n: usize, d: usize) -> Result<f64> {
    VawRelaxation::new(lambda, b, n, d)?.value(history.iter().map(|(z, y)| (z.as_slice(), *y)))
}

impl RelaxationOracle for VawRelaxation {
    fn meta(&self) -> RelaxationMeta {
        RelaxationMeta {
            name: "vaw".into(),
            family: format!("linear, d = {}", self.dimension),
            model: format!("square loss, B = {}", self.b),
            parameters: json!({
                "lambda": self.lambda,
                "horizon": self.horizon,
                "capacity": self.capacity,
            }),
        }
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn evaluate(&self, xs: &[Covariate], ys: &[f64]) -> Result<f64> {
        let zs = xs.iter().map(Covariate::vector).collect::<Result<Vec<_>>>()?;
        self.value(zs.into_iter().zip(ys.iter().copied()))
    }
}

/// Online form of [`vaw_forecast`] with incrementally updated sums.
#[derive(Debug, Clone)]
pub struct VawForecaster {
    lambda: f64,
    b: f64,
    gram: Matrix,
    xy: Vec<f64>,
}

impl VawForecaster {
    pub fn new(dimension: usize, lambda: f64, b: f64) -> Result<Self> {
        check_params(lambda, b, dimension)?;
        Ok(VawForecaster {
            lambda,
            b,
            gram: Matrix::scaled_identity(dimension, lambda),
            xy: vec![0.0; dimension],
        })
    }
}

impl Forecaster for VawForecaster {
    fn name(&self) -> String {
        format!("vaw(lambda = {})", self.lambda)
    }

    fn predict(&mut self, x: &Covariate) -> Result<f64> {
        let x = x.vector()?;
        check_dim(x, self.gram.dim())?;
        let mut a = self.gram.clone();
        a.add_outer(x, 1.0);
        let w = Cholesky::factor(&a)?.solve(&self.xy);
        Ok(clip(crate::linalg::dot(x, &w), self.b))
    }

    fn observe(&mut self, x: &Covariate, y: f64) -> Result<()> {
        let x = x.vector()?;
        check_dim(x, self.gram.dim())?;
        self.gram.add_outer(x, 1.0);
        for (s, xi) in self.xy.iter_mut().zip(x) {
            *s += y * xi;
        }
        Ok(())
    }
}
