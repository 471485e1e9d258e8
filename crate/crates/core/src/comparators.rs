//! Benchmark classes `ℱ` and the comparator term of regret.

use std::path::Path;

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{dot, Cholesky, Matrix};
use crate::losses::{Interval, LossModel};
use crate::numeric::golden_section_min;
use crate::{Error, ExtReal, Result};

/// Largest number of supports enumerated for sparse convex classes.
pub const SUPPORT_GUARD: u64 = 1_000_000;

/// A point of the abstract covariate set: an identifier resolved through a
/// finite family, or a real vector for linear classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Covariate {
    Id(usize),
    Vector(Vec<f64>),
}

impl Covariate {
    pub fn id(&self) -> Result<usize> {
        match self {
            Covariate::Id(i) => Ok(*i),
            Covariate::Vector(_) => Err(Error::Lookup("expected a covariate identifier".into())),
        }
    }

    pub fn vector(&self) -> Result<&[f64]> {
        match self {
            Covariate::Vector(v) => Ok(v),
            Covariate::Id(_) => Err(Error::Lookup("expected a covariate vector".into())),
        }
    }
}

/// Handle selecting one member of a family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Predictor {
    Index(usize),
    Weights(Vec<f64>),
    Sparse { support: Vec<usize>, weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable")]
pub struct FiniteTable {
    pub covariate_ids: Vec<String>,
    /// `values[f][x]`
    pub values: Vec<Vec<f64>>,
}

/// Wire form; ids default to `x0, x1, ...`.
#[derive(Deserialize)]
struct RawTable {
    #[serde(default)]
    covariate_ids: Option<Vec<String>>,
    values: Vec<Vec<f64>>,
}

impl TryFrom<RawTable> for FiniteTable {
    type Error = Error;

    fn try_from(raw: RawTable) -> Result<Self> {
        match raw.covariate_ids {
            Some(ids) => FiniteTable::with_ids(ids, raw.values),
            None => FiniteTable::new(raw.values),
        }
    }
}

impl FiniteTable {
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        let width = values.first().map_or(0, Vec::len);
        let ids = (0..width).map(|i| format!("x{i}")).collect();
        Self::with_ids(ids, values)
    }

    pub fn with_ids(covariate_ids: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("finite table needs at least one predictor".into()));
        }
        for (f, row) in values.iter().enumerate() {
            if row.len() != covariate_ids.len() {
                return Err(Error::Shape(format!(
                    "predictor {f} has {} values for {} covariates",
                    row.len(),
                    covariate_ids.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("predictor {f} has a non-finite value")));
            }
        }
        Ok(FiniteTable {
            covariate_ids,
            values,
        })
    }

    /// Rows are predictors, columns covariates; an optional header row names
    /// the covariates.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut ids = None;
        let mut values = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Config(format!("csv: {e}")))?;
            let parsed: std::result::Result<Vec<f64>, _> =
                record.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(row) => values.push(row),
                Err(_) if i == 0 => ids = Some(record.iter().map(String::from).collect()),
                Err(e) => return Err(Error::Config(format!("csv row {}: {e}", i + 1))),
            }
        }
        match ids {
            Some(ids) => Self::with_ids(ids, values),
            None => Self::new(values),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn covariate_count(&self) -> usize {
        self.covariate_ids.len()
    }

    pub fn value(&self, f: usize, x: usize) -> Result<f64> {
        self.values
            .get(f)
            .ok_or_else(|| Error::Lookup(format!("predictor {f} of {}", self.len())))?
            .get(x)
            .copied()
            .ok_or_else(|| Error::Lookup(format!("covariate {x} of {}", self.covariate_count())))
    }

    pub fn output_range(&self) -> Interval {
        let (lo, hi) = self
            .values
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        Interval::new(lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFamily {
    pub dimension: usize,
    /// Constraint `‖w‖₂ ≤ W`; unconstrained when absent.
    #[serde(default)]
    pub weight_norm_bound: Option<f64>,
    /// Ridge term `λ‖w‖²` added to the comparator loss.
    #[serde(default)]
    pub ridge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseConvexFamily {
    /// `base_values[j][x] ∈ [−1, 1]`
    pub base_values: Vec<Vec<f64>>,
    pub sparsity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComparatorFamily {
    FiniteTable(FiniteTable),
    Linear(LinearFamily),
    SparseConvex(SparseConvexFamily),
}

impl ComparatorFamily {
    pub fn finite(values: Vec<Vec<f64>>) -> Result<Self> {
        Ok(ComparatorFamily::FiniteTable(FiniteTable::new(values)?))
    }

    pub fn linear(dimension: usize, ridge: f64) -> Self {
        ComparatorFamily::Linear(LinearFamily {
            dimension,
            weight_norm_bound: None,
            ridge,
        })
    }

    pub fn sparse_convex(base_values: Vec<Vec<f64>>, sparsity: usize) -> Result<Self> {
        let m = base_values.len();
        if m == 0 || sparsity == 0 || sparsity > m {
            return Err(Error::InvalidArgument(format!(
                "sparsity {sparsity} must lie in 1..={m}"
            )));
        }
        let width = base_values[0].len();
        if base_values.iter().any(|r| r.len() != width) {
            return Err(Error::Shape("base functions disagree on the covariate count".into()));
        }
        if base_values.iter().flatten().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("base function values must lie in [-1, 1]".into()));
        }
        Ok(ComparatorFamily::SparseConvex(SparseConvexFamily {
            base_values,
            sparsity,
        }))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let family: ComparatorFamily = serde_json::from_str(text)?;
        family.validate()?;
        Ok(family)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ComparatorFamily::FiniteTable(t) => {
                FiniteTable::with_ids(t.covariate_ids.clone(), t.values.clone()).map(|_| ())
            }
            ComparatorFamily::Linear(l) if l.dimension == 0 => {
                Err(Error::InvalidArgument("linear family needs dimension >= 1".into()))
            }
            ComparatorFamily::Linear(l) if l.ridge < 0.0 => {
                Err(Error::InvalidArgument("ridge term must be >= 0".into()))
            }
            ComparatorFamily::Linear(_) => Ok(()),
            ComparatorFamily::SparseConvex(s) => {
                Self::sparse_convex(s.base_values.clone(), s.sparsity).map(|_| ())
            }
        }
    }

    pub fn as_table(&self) -> Result<&FiniteTable> {
        match self {
            ComparatorFamily::FiniteTable(t) => Ok(t),
            _ => Err(Error::Capability("operation needs a finite table family".into())),
        }
    }

    /// Interval containing every achievable value, when one is known.
    ///
    /// Linear classes report `[−W, W]` under a norm bound, assuming
    /// covariates in the unit ball.
    pub fn output_range(&self) -> Option<Interval> {
        match self {
            ComparatorFamily::FiniteTable(t) => Some(t.output_range()),
            ComparatorFamily::Linear(l) => l.weight_norm_bound.map(Interval::symmetric),
            ComparatorFamily::SparseConvex(_) => Some(Interval::symmetric(1.0)),
        }
    }

    pub fn evaluate(&self, predictor: &Predictor, x: &Covariate) -> Result<f64> {
        match (self, predictor) {
            (ComparatorFamily::FiniteTable(t), Predictor::Index(f)) => t.value(*f, x.id()?),
            (ComparatorFamily::Linear(l), Predictor::Weights(w)) => {
                let v = x.vector()?;
                if w.len() != l.dimension || v.len() != l.dimension {
                    return Err(Error::Lookup(format!(
                        "linear family of dimension {} got weights {} / covariate {}",
                        l.dimension,
                        w.len(),
                        v.len()
                    )));
                }
                if let Some(bound) = l.weight_norm_bound {
                    if dot(w, w).sqrt() > bound + 1e-12 {
                        return Err(Error::Lookup(format!("weights exceed norm bound {bound}")));
                    }
                }
                Ok(dot(w, v))
            }
            (ComparatorFamily::SparseConvex(s), Predictor::Sparse { support, weights }) => {
                s.check_member(support, weights)?;
                let x = x.id()?;
                support
                    .iter()
                    .zip(weights)
                    .map(|(&j, &a)| {
                        s.base_values[j]
                            .get(x)
                            .map(|v| a * v)
                            .ok_or_else(|| Error::Lookup(format!("covariate {x}")))
                    })
                    .sum()
            }
            _ => Err(Error::Lookup(format!(
                "predictor handle {predictor:?} does not match the family variant"
            ))),
        }
    }

    /// `inf_f Σ_t ℓ(f(x_t), y_t)` (plus the ridge term for linear classes).
    pub fn best_comparator_loss(&self, model: &LossModel, history: &[(Covariate, f64)]) -> Result<f64> {
        if history.is_empty() {
            return Err(Error::InvalidArgument("history must be nonempty".into()));
        }
        for (_, y) in history {
            model.outcome_range.check("outcome", *y)?;
        }
        match self {
            ComparatorFamily::FiniteTable(t) => {
                let xs = history.iter().map(|(x, _)| x.id()).collect::<Result<Vec<_>>>()?;
                let mut best = f64::INFINITY;
                for f in 0..t.len() {
                    let mut total = 0.0;
                    for (x, (_, y)) in xs.iter().zip(history) {
                        total += model.value(t.value(f, *x)?, *y)?;
                    }
                    best = best.min(total);
                }
                Ok(best)
            }
            ComparatorFamily::Linear(l) => {
                let mut acc = RidgeAccumulator::new(l.dimension);
                for (x, y) in history {
                    acc.push(x.vector()?, *y)?;
                }
                acc.best_loss(model, l)
            }
            ComparatorFamily::SparseConvex(s) => s.best_loss(model, history),
        }
    }

    pub fn tracker<'a>(&'a self, model: &'a LossModel) -> ComparatorTracker<'a> {
        let state = match self {
            ComparatorFamily::FiniteTable(t) => TrackerState::Table(vec![0.0; t.len()]),
            ComparatorFamily::Linear(l) => TrackerState::Linear(RidgeAccumulator::new(l.dimension)),
            ComparatorFamily::SparseConvex(_) => TrackerState::Replay(Vec::new()),
        };
        ComparatorTracker {
            family: self,
            model,
            state,
        }
    }
}

impl SparseConvexFamily {
    fn check_member(&self, support: &[usize], weights: &[f64]) -> Result<()> {
        if support.len() != weights.len() || support.len() > self.sparsity || support.is_empty() {
            return Err(Error::Lookup(format!(
                "sparse member needs 1..={} (index, weight) pairs",
                self.sparsity
            )));
        }
        let mut seen = support.to_vec();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != support.len() || seen.last().is_some_and(|&j| j >= self.base_values.len()) {
            return Err(Error::Lookup("support indices must be distinct and in range".into()));
        }
        if weights.iter().any(|&a| a < 0.0) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Lookup("weights must be nonnegative and sum to 1".into()));
        }
        Ok(())
    }

    fn best_loss(&self, model: &LossModel, history: &[(Covariate, f64)]) -> Result<f64> {
        let m = self.base_values.len();
        let k = self.sparsity.min(m);
        let count = binomial(m as u64, k as u64);
        if count > SUPPORT_GUARD {
            return Err(Error::Resource {
                what: "sparse support enumeration",
                required: count as f64,
                limit: SUPPORT_GUARD as f64,
            });
        }
        let xs = history.iter().map(|(x, _)| x.id()).collect::<Result<Vec<_>>>()?;
        let width = self.base_values[0].len();
        if let Some(&bad) = xs.iter().find(|&&x| x >= width) {
            return Err(Error::Lookup(format!("covariate {bad} of {width}")));
        }
        let ys: Vec<f64> = history.iter().map(|(_, y)| *y).collect();
        let supports: Vec<Vec<usize>> = (0..m).combinations(k).collect();
        let best = supports
            .par_iter()
            .map(|support| {
                let cols: Vec<Vec<f64>> = support
                    .iter()
                    .map(|&j| xs.iter().map(|&x| self.base_values[j][x]).collect())
                    .collect();
                minimize_on_simplex(model, &cols, &ys)
            })
            .reduce(|| f64::INFINITY, f64::min);
        Ok(best)
    }
}

/// Minimizes `Σ_t ℓ(Σ_j α_j c_j[t], y_t)` over the simplex by pairwise
/// mass exchange with golden-section line searches.
fn minimize_on_simplex(model: &LossModel, cols: &[Vec<f64>], ys: &[f64]) -> f64 {
    let k = cols.len();
    let objective = |alpha: &[f64]| -> f64 {
        ys.iter()
            .enumerate()
            .map(|(t, &y)| {
                let p: f64 = (0..k).map(|j| alpha[j] * cols[j][t]).sum();
                model.value_unchecked(p, y)
            })
            .sum()
    };
    let mut alpha = vec![1.0 / k as f64; k];
    let mut value = objective(&alpha);
    // vertices first: convex objectives on tiny supports often sit there
    for j in 0..k {
        let mut e = vec![0.0; k];
        e[j] = 1.0;
        let v = objective(&e);
        if v < value {
            value = v;
            alpha = e;
        }
    }
    if k == 1 {
        return value;
    }
    for _sweep in 0..200 {
        let before = value;
        for i in 0..k {
            for j in (i + 1)..k {
                let (lo, hi) = (-alpha[i], alpha[j]);
                if hi - lo <= 0.0 {
                    continue;
                }
                let line = |theta: f64| {
                    let mut a = alpha.clone();
                    a[i] += theta;
                    a[j] -= theta;
                    a[i] = a[i].max(0.0);
                    a[j] = a[j].max(0.0);
                    ExtReal::Finite(objective(&a))
                };
                let m = golden_section_min(line, lo, hi, 1e-10);
                let v = m.value.to_f64();
                if v < value {
                    value = v;
                    alpha[i] = (alpha[i] + m.arg).max(0.0);
                    alpha[j] = (alpha[j] - m.arg).max(0.0);
                }
            }
        }
        if before - value <= 1e-8 * before.abs().max(1e-12) {
            break;
        }
    }
    value
}

pub(crate) fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Sufficient statistics `XᵀX`, `Xᵀy`, `yᵀy` of a linear-regression history.
#[derive(Debug, Clone)]
pub struct RidgeAccumulator {
    gram: Matrix,
    xty: Vec<f64>,
    yty: f64,
}

impl RidgeAccumulator {
    pub fn new(d: usize) -> Self {
        RidgeAccumulator {
            gram: Matrix::zeros(d),
            xty: vec![0.0; d],
            yty: 0.0,
        }
    }

    pub fn push(&mut self, x: &[f64], y: f64) -> Result<()> {
        if x.len() != self.xty.len() {
            return Err(Error::Lookup(format!(
                "covariate of dimension {} for a dimension-{} class",
                x.len(),
                self.xty.len()
            )));
        }
        self.gram.add_outer(x, 1.0);
        for (acc, xi) in self.xty.iter_mut().zip(x) {
            *acc += y * xi;
        }
        self.yty += y * y;
        Ok(())
    }

    /// Minimizer of `Σ(wᵀx − y)² + λ‖w‖²`.
    pub fn ridge_solution(&self, lambda: f64) -> Result<Vec<f64>> {
        let mut a = self.gram.clone();
        for i in 0..a.dim() {
            a[(i, i)] += lambda;
        }
        Ok(Cholesky::factor(&a)?.solve(&self.xty))
    }

    /// `Σ(wᵀx − y)² + λ‖w‖²` at `w`.
    pub fn objective(&self, w: &[f64], lambda: f64) -> f64 {
        let gw = self.gram.mul_vec(w);
        self.yty - 2.0 * dot(w, &self.xty) + dot(w, &gw) + lambda * dot(w, w)
    }

    fn best_loss(&self, model: &LossModel, family: &LinearFamily) -> Result<f64> {
        if !model.is_square() {
            return Err(Error::Capability(
                "linear comparator loss is implemented for square loss only".into(),
            ));
        }
        let lambda = family.ridge;
        let w = self.ridge_solution(lambda)?;
        let Some(bound) = family.weight_norm_bound else {
            return Ok(self.objective(&w, lambda));
        };
        if dot(&w, &w).sqrt() <= bound {
            return Ok(self.objective(&w, lambda));
        }
        // ‖w(λ + μ)‖ decreases in μ; bisect for the constraint to bind
        let mut lo = 0.0;
        let mut hi = 1.0;
        while {
            let w = self.ridge_solution(lambda + hi)?;
            dot(&w, &w).sqrt() > bound
        } {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let w = self.ridge_solution(lambda + mid)?;
            if dot(&w, &w).sqrt() > bound {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let w = self.ridge_solution(lambda + hi)?;
        Ok(self.objective(&w, lambda))
    }
}

enum TrackerState {
    Table(Vec<f64>),
    Linear(RidgeAccumulator),
    Replay(Vec<(Covariate, f64)>),
}

/// Incrementally maintained `inf_f` of the cumulative comparator loss.
pub struct ComparatorTracker<'a> {
    family: &'a ComparatorFamily,
    model: &'a LossModel,
    state: TrackerState,
}

impl ComparatorTracker<'_> {
    pub fn push(&mut self, x: &Covariate, y: f64) -> Result<()> {
        self.model.outcome_range.check("outcome", y)?;
        match (&mut self.state, self.family) {
            (TrackerState::Table(losses), ComparatorFamily::FiniteTable(t)) => {
                let x = x.id()?;
                for (f, l) in losses.iter_mut().enumerate() {
                    *l += self.model.value(t.value(f, x)?, y)?;
                }
            }
            (TrackerState::Linear(acc), _) => acc.push(x.vector()?, y)?,
            (TrackerState::Replay(h), _) => h.push((x.clone(), y)),
            _ => unreachable!("tracker state matches its family"),
        }
        Ok(())
    }

    pub fn best_loss(&self) -> Result<f64> {
        match (&self.state, self.family) {
            (TrackerState::Table(l), _) => Ok(l.iter().copied().fold(f64::INFINITY, f64::min)),
            (TrackerState::Linear(acc), ComparatorFamily::Linear(fam)) => acc.best_loss(self.model, fam),
            (TrackerState::Replay(h), family) if !h.is_empty() => family.best_comparator_loss(self.model, h),
            (TrackerState::Replay(_), _) => Ok(0.0),
            _ => unreachable!("tracker state matches its family"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hist(pairs: &[(usize, f64)]) -> Vec<(Covariate, f64)> {
        pairs.iter().map(|&(x, y)| (Covariate::Id(x), y)).collect()
    }

    #[test]
    fn evaluate_examples() {
        let t = ComparatorFamily::finite(vec![vec![1.0, -1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(t.evaluate(&Predictor::Index(0), &Covariate::Id(1)).unwrap(), -1.0);
        let l = ComparatorFamily::linear(2, 0.0);
        let v = l
            .evaluate(&Predictor::Weights(vec![1.0, 2.0]), &Covariate::Vector(vec![3.0, -1.0]))
            .unwrap();
        assert_eq!(v, 1.0);
        let s = ComparatorFamily::sparse_convex(vec![vec![1.0], vec![0.0], vec![-1.0]], 2).unwrap();
        let p = Predictor::Sparse {
            support: vec![0, 1],
            weights: vec![0.5, 0.5],
        };
        assert_eq!(s.evaluate(&p, &Covariate::Id(0)).unwrap(), 0.5);
    }

    #[test]
    fn evaluate_rejects_bad_handles() {
        let t = ComparatorFamily::finite(vec![vec![1.0, -1.0]]).unwrap();
        assert!(matches!(t.evaluate(&Predictor::Index(3), &Covariate::Id(0)), Err(Error::Lookup(_))));
        assert!(t.evaluate(&Predictor::Index(0), &Covariate::Id(2)).is_err());
        assert!(t.evaluate(&Predictor::Weights(vec![1.0]), &Covariate::Id(0)).is_err());
        let s = ComparatorFamily::sparse_convex(vec![vec![1.0], vec![0.0]], 1).unwrap();
        let two = Predictor::Sparse {
            support: vec![0, 1],
            weights: vec![0.5, 0.5],
        };
        assert!(s.evaluate(&two, &Covariate::Id(0)).is_err());
        let unnormalized = Predictor::Sparse {
            support: vec![0],
            weights: vec![0.5],
        };
        assert!(s.evaluate(&unnormalized, &Covariate::Id(0)).is_err());
    }

    #[test]
    fn best_loss_examples() {
        let sq = LossModel::square(1.0);
        let one = ComparatorFamily::finite(vec![vec![0.0]]).unwrap();
        assert_eq!(one.best_comparator_loss(&sq, &hist(&[(0, 1.0), (0, -1.0)])).unwrap(), 2.0);

        let lin = ComparatorFamily::linear(1, 1.0);
        let h = vec![(Covariate::Vector(vec![1.0]), 1.0)];
        assert!((lin.best_comparator_loss(&sq, &h).unwrap() - 0.5).abs() < 1e-12);

        let abs = LossModel::absolute(1.0);
        let pm = ComparatorFamily::finite(vec![vec![1.0], vec![-1.0]]).unwrap();
        assert_eq!(pm.best_comparator_loss(&abs, &hist(&[(0, 1.0)])).unwrap(), 0.0);

        assert!(pm.best_comparator_loss(&abs, &[]).is_err());
        assert!(matches!(
            lin.best_comparator_loss(&abs, &h),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn norm_bound_binds() {
        let sq = LossModel::square(2.0);
        let fam = ComparatorFamily::Linear(LinearFamily {
            dimension: 1,
            weight_norm_bound: Some(0.5),
            ridge: 0.0,
        });
        let h = vec![(Covariate::Vector(vec![1.0]), 2.0), (Covariate::Vector(vec![1.0]), 2.0)];
        // w clamps to 0.5: 2·(0.5 − 2)² = 4.5
        assert!((fam.best_comparator_loss(&sq, &h).unwrap() - 4.5).abs() < 1e-9);
    }

    #[test]
    fn sparse_best_loss_is_exact_on_small_instance() {
        let sq = LossModel::square(1.0);
        let fam = ComparatorFamily::sparse_convex(vec![vec![1.0, 1.0], vec![-1.0, 1.0], vec![0.0, -1.0]], 2).unwrap();
        // outcome 0 at x0 is reached by ½(g0 + g1) while fitting 1 at x1
        let h = hist(&[(0, 0.0), (1, 1.0)]);
        assert!(fam.best_comparator_loss(&sq, &h).unwrap() < 1e-12);
        // brute force over a fine simplex grid for the s = 2 supports
        let h = hist(&[(0, 0.3), (1, -0.2), (0, -0.9)]);
        let got = fam.best_comparator_loss(&sq, &h).unwrap();
        let ComparatorFamily::SparseConvex(s) = &fam else { unreachable!() };
        let mut brute = f64::INFINITY;
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            for k in 0..=10_000 {
                let a = k as f64 / 10_000.0;
                let loss: f64 = h
                    .iter()
                    .map(|(x, y)| {
                        let x = x.id().unwrap();
                        let p = a * s.base_values[i][x] + (1.0 - a) * s.base_values[j][x];
                        (p - y).powi(2)
                    })
                    .sum();
                brute = brute.min(loss);
            }
        }
        assert!(got <= brute + 1e-9 && brute - got < 1e-6, "{got} vs {brute}");
    }

    #[test]
    fn best_loss_lower_bounds_members_and_grows_with_history() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sq = LossModel::square(1.0);
        let values: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let table = ComparatorFamily::finite(values.clone()).unwrap();
        let sparse = ComparatorFamily::sparse_convex(values, 2).unwrap();
        let lin = ComparatorFamily::linear(3, 0.5);
        let h: Vec<(usize, f64)> = (0..12).map(|_| (rng.gen_range(0..4), rng.gen_range(-1.0..1.0))).collect();
        let h = hist(&h);
        let hv: Vec<(Covariate, f64)> = (0..12)
            .map(|_| {
                (
                    Covariate::Vector((0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let best_t = table.best_comparator_loss(&sq, &h).unwrap();
        let best_s = sparse.best_comparator_loss(&sq, &h).unwrap();
        let best_l = lin.best_comparator_loss(&sq, &hv).unwrap();
        assert!(best_s <= best_t + 1e-9, "convex hull contains the vertices");
        for _ in 0..100 {
            let f = rng.gen_range(0..6);
            let member: f64 = h
                .iter()
                .map(|(x, y)| (table.evaluate(&Predictor::Index(f), x).unwrap() - y).powi(2))
                .sum();
            assert!(best_t <= member + 1e-12);

            let i = rng.gen_range(0..6);
            let j = (i + 1 + rng.gen_range(0..5)) % 6;
            let a: f64 = rng.gen_range(0.0..1.0);
            let p = Predictor::Sparse {
                support: vec![i, j],
                weights: vec![a, 1.0 - a],
            };
            let member: f64 = h
                .iter()
                .map(|(x, y)| (sparse.evaluate(&p, x).unwrap() - y).powi(2))
                .sum();
            assert!(best_s <= member + 1e-8);

            let w: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let member: f64 = hv
                .iter()
                .map(|(x, y)| (lin.evaluate(&Predictor::Weights(w.clone()), x).unwrap() - y).powi(2))
                .sum::<f64>()
                + 0.5 * dot(&w, &w);
            assert!(best_l <= member + 1e-9);
        }
        for t in 1..h.len() {
            let a = table.best_comparator_loss(&sq, &h[..t]).unwrap();
            let b = table.best_comparator_loss(&sq, &h[..t + 1]).unwrap();
            assert!(b >= a);
            let a = lin.best_comparator_loss(&sq, &hv[..t]).unwrap();
            let b = lin.best_comparator_loss(&sq, &hv[..t + 1]).unwrap();
            assert!(b >= a - 1e-12);
        }
    }

    #[test]
    fn tracker_matches_batch() {
        let sq = LossModel::square(1.0);
        let table = ComparatorFamily::finite(vec![vec![0.5, -0.5], vec![-1.0, 1.0]]).unwrap();
        let h = hist(&[(0, 1.0), (1, -1.0), (1, 0.2)]);
        let mut tr = table.tracker(&sq);
        for (i, (x, y)) in h.iter().enumerate() {
            tr.push(x, *y).unwrap();
            let batch = table.best_comparator_loss(&sq, &h[..=i]).unwrap();
            assert!((tr.best_loss().unwrap() - batch).abs() < 1e-12);
        }
    }

    #[test]
    fn loads_json_and_csv() {
        let fam = ComparatorFamily::from_json(
            r#"{"kind":"finite_table","covariate_ids":["a","b"],"values":[[1,-1],[0,0.5]]}"#,
        )
        .unwrap();
        assert_eq!(fam.as_table().unwrap().len(), 2);
        let t = FiniteTable::from_csv_str("a, b\n1, -1\n0, 0.5\n").unwrap();
        assert_eq!(t.covariate_ids, vec!["a", "b"]);
        assert_eq!(t.values, vec![vec![1.0, -1.0], vec![0.0, 0.5]]);
        let t = FiniteTable::from_csv_str("1,2\n3,4\n").unwrap();
        assert_eq!(t.covariate_ids.len(), 2);
        assert!(FiniteTable::from_csv_str("1,2\n3\n").is_err());
        assert!(ComparatorFamily::from_json(r#"{"kind":"linear","dimension":0}"#).is_err());
    }

    #[test]
    fn combinatorics_helpers() {
        assert_eq!(binomial(8, 2), 28);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 4), 0);
    }
}
