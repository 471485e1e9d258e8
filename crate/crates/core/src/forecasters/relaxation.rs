//! Relaxations, the forecast they induce, and numeric admissibility checks.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::comparators::{ComparatorFamily, Covariate};
use crate::losses::{Interval, LossModel};
use crate::numeric::{golden_section_min, linspace};
use crate::{Error, ExtReal, Result};

/// Slack allowed in every admissibility inequality.
pub const ADMISSIBILITY_TOL: f64 = 1e-8;

/// Mixing weights tried in the two-point distributional check.
pub const RECIPE_POINTS: usize = 101;

const SEARCH_TOL: f64 = 1e-13;

/// Descriptive data attached to a relaxation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationMeta {
    pub name: String,
    pub family: String,
    pub model: String,
    pub parameters: serde_json::Value,
}

/// A potential `Rel_n(x_{1:t}, y_{1:t})` on observed histories.
///
/// `xs` and `ys` always have equal length `t ≤ horizon`.
pub trait RelaxationOracle: Sync {
    fn meta(&self) -> RelaxationMeta;
    fn horizon(&self) -> usize;
    fn evaluate(&self, xs: &[Covariate], ys: &[f64]) -> Result<f64>;
}

impl<R: RelaxationOracle + ?Sized> RelaxationOracle for &R {
    fn meta(&self) -> RelaxationMeta {
        (**self).meta()
    }
    fn horizon(&self) -> usize {
        (**self).horizon()
    }
    fn evaluate(&self, xs: &[Covariate], ys: &[f64]) -> Result<f64> {
        (**self).evaluate(xs, ys)
    }
}

/// Where the learner's prediction may lie.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionSet {
    Interval(Interval),
    Grid(Vec<f64>),
}

impl PredictionSet {
    /// The whole prediction range of `model`.
    pub fn of(model: &LossModel) -> Self {
        PredictionSet::Interval(model.prediction_range)
    }

    fn validate(&self, model: &LossModel) -> Result<()> {
        match self {
            PredictionSet::Interval(i) => {
                model.prediction_range.check("prediction set endpoint", i.lo)?;
                model.prediction_range.check("prediction set endpoint", i.hi)
            }
            PredictionSet::Grid(g) if g.is_empty() => Err(Error::InvalidArgument("empty prediction grid".into())),
            PredictionSet::Grid(g) => g.iter().try_for_each(|&v| model.prediction_range.check("prediction grid point", v)),
        }
    }
}

/// `Clip(z)` to `[−B, B]`.
pub fn clip(z: f64, b: f64) -> f64 {
    z.clamp(-b, b)
}

/// Minimizer over `prediction` of `max_y {ℓ(ŷ, y) + r_y}` for the given
/// `(y, r_y)` continuations. Grid ties go to the smallest `ŷ`.
pub fn argmin_forecast(model: &LossModel, continuations: &[(f64, f64)], prediction: &PredictionSet) -> Result<f64> {
    if continuations.is_empty() {
        return Err(Error::InvalidArgument("empty outcome grid".into()));
    }
    let objective = |yhat: f64| {
        continuations
            .iter()
            .map(|&(y, r)| model.value_unchecked(yhat, y) + r)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    match prediction {
        PredictionSet::Grid(grid) => {
            let mut sorted = grid.clone();
            sorted.sort_by(f64::total_cmp);
            let mut best = (f64::INFINITY, sorted[0]);
            for &p in &sorted {
                let v = objective(p);
                if v < best.0 {
                    best = (v, p);
                }
            }
            Ok(best.1)
        }
        PredictionSet::Interval(i) => {
            Ok(golden_section_min(|p| ExtReal::Finite(objective(p)), i.lo, i.hi, SEARCH_TOL).arg)
        }
    }
}

fn is_two_point(outcome_grid: &[f64], b: f64) -> bool {
    outcome_grid.iter().all(|&y| y == b || y == -b)
        && outcome_grid.contains(&b)
        && outcome_grid.contains(&-b)
}

fn split(history: &[(Covariate, f64)], x_t: &Covariate) -> (Vec<Covariate>, Vec<f64>) {
    let mut xs: Vec<Covariate> = history.iter().map(|(x, _)| x.clone()).collect();
    xs.push(x_t.clone());
    let ys = history.iter().map(|(_, y)| *y).collect();
    (xs, ys)
}

fn continuations<R: RelaxationOracle + ?Sized>(
    rel: &R,
    xs: &[Covariate],
    ys: &mut Vec<f64>,
    outcome_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    outcome_grid
        .iter()
        .map(|&y| {
            ys.push(y);
            let r = rel.evaluate(xs, ys);
            ys.pop();
            Ok((y, r?))
        })
        .collect()
}

/// The forecast `argmin_ŷ max_y {ℓ(ŷ, y) + Rel(x_{1:t}, y_{1:t})}`.
///
/// Square loss with outcomes `{−B, B}` and predictions in `[−B, B]` uses
/// `Clip((Rel(…, B) − Rel(…, −B)) / (4B))`.
pub fn relaxation_forecast<R: RelaxationOracle + ?Sized>(
    rel: &R,
    model: &LossModel,
    history: &[(Covariate, f64)],
    x_t: &Covariate,
    prediction: &PredictionSet,
    outcome_grid: &[f64],
) -> Result<f64> {
    if history.len() >= rel.horizon() {
        return Err(Error::Protocol(format!(
            "history of length {} leaves no round in horizon {}",
            history.len(),
            rel.horizon()
        )));
    }
    prediction.validate(model)?;
    let b = model.bound();
    let (xs, mut ys) = split(history, x_t);
    let cont = continuations(rel, &xs, &mut ys, outcome_grid)?;
    let full = PredictionSet::Interval(Interval::symmetric(b));
    if model.is_square() && is_two_point(outcome_grid, b) && *prediction == full {
        let at = |v: f64| cont.iter().find(|c| c.0 == v).map(|c| c.1).expect("two-point grid");
        return Ok(clip((at(b) - at(-b)) / (4.0 * b), b));
    }
    argmin_forecast(model, &cont, prediction)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Recursive,
    Initial,
    Recipe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Round `t` whose step is checked (`n` for the initial condition).
    pub round: usize,
    pub margin: f64,
    pub history: Vec<(Covariate, f64)>,
    pub covariate: Option<Covariate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMargin {
    pub round: usize,
    pub checks: usize,
    /// Smallest `Rel(x_{1:t−1}, y_{1:t−1}) − inf_ŷ max_y {…}` seen.
    pub worst_recursive: f64,
    /// Smallest margin of the two-point distributional condition.
    pub worst_recipe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub relaxation: RelaxationMeta,
    pub rounds: Vec<RoundMargin>,
    /// Smallest `Rel(x_{1:n}, y_{1:n}) + inf_f Σ ℓ` over full histories;
    /// `None` when no full history was supplied.
    pub worst_initial: Option<f64>,
    pub violations: Vec<Violation>,
    pub admissible: bool,
}

impl AdmissibilityReport {
    pub fn worst_recursive(&self) -> f64 {
        self.rounds.iter().map(|r| r.worst_recursive).fold(f64::INFINITY, f64::min)
    }

    pub fn worst_recipe(&self) -> f64 {
        self.rounds.iter().map(|r| r.worst_recipe).fold(f64::INFINITY, f64::min)
    }

    /// Smallest of all margins.
    pub fn worst_margin(&self) -> f64 {
        self.worst_recursive()
            .min(self.worst_recipe())
            .min(self.worst_initial.unwrap_or(f64::INFINITY))
    }
}

const VIOLATION_CAP: usize = 32;

struct Checker<'a, R: ?Sized> {
    rel: &'a R,
    model: &'a LossModel,
    family: &'a ComparatorFamily,
    covariate_set: &'a [Covariate],
    outcome_grid: &'a [f64],
    prediction: &'a PredictionSet,
    rounds: Vec<RoundMargin>,
    worst_initial: Option<f64>,
    violations: Vec<Violation>,
}

impl<R: RelaxationOracle + ?Sized> Checker<'_, R> {
    fn record(&mut self, kind: ViolationKind, round: usize, margin: f64, history: &[(Covariate, f64)], x: Option<&Covariate>) {
        if margin < -ADMISSIBILITY_TOL && self.violations.len() < VIOLATION_CAP {
            self.violations.push(Violation {
                kind,
                round,
                margin,
                history: history.to_vec(),
                covariate: x.cloned(),
            });
        }
    }

    /// `min_ŷ E_{y∼p} ℓ(ŷ, y)` for `p = w δ_B + (1 − w) δ_{−B}`.
    fn expected_loss_min(&self, w: f64) -> f64 {
        let b = self.model.bound();
        let obj = |p: f64| w * self.model.value_unchecked(p, b) + (1.0 - w) * self.model.value_unchecked(p, -b);
        if self.model.is_square() {
            let mean = (2.0 * w - 1.0) * b;
            return obj(self.model.prediction_range.clamp(mean));
        }
        let r = self.model.prediction_range;
        golden_section_min(|p| ExtReal::Finite(obj(p)), r.lo, r.hi, SEARCH_TOL).value.to_f64()
    }

    /// All checks at the node `prefix` (round `prefix.len() + 1`).
    fn step(&mut self, prefix: &[(Covariate, f64)]) -> Result<()> {
        let t = prefix.len() + 1;
        let b = self.model.bound();
        let xs_prev: Vec<Covariate> = prefix.iter().map(|(x, _)| x.clone()).collect();
        let ys_prev: Vec<f64> = prefix.iter().map(|(_, y)| *y).collect();
        let rhs = self.rel.evaluate(&xs_prev, &ys_prev)?;
        let mut worst = f64::INFINITY;
        let mut worst_recipe = f64::INFINITY;
        for x in self.covariate_set {
            let (xs, mut ys) = split(prefix, x);
            let cont = continuations(self.rel, &xs, &mut ys, self.outcome_grid)?;
            let yhat = relaxation_forecast(self.rel, self.model, prefix, x, self.prediction, self.outcome_grid)?;
            let lhs = cont
                .iter()
                .map(|&(y, r)| self.model.value_unchecked(yhat, y) + r)
                .fold(f64::NEG_INFINITY, f64::max);
            let margin = rhs - lhs;
            worst = worst.min(margin);
            self.record(ViolationKind::Recursive, t, margin, prefix, Some(x));

            let pm = continuations(self.rel, &xs, &mut ys, &[b, -b])?;
            for w in linspace(0.0, 1.0, RECIPE_POINTS) {
                let lhs = self.expected_loss_min(w) + w * pm[0].1 + (1.0 - w) * pm[1].1;
                let margin = rhs - lhs;
                if margin < worst_recipe {
                    worst_recipe = margin;
                }
                self.record(ViolationKind::Recipe, t, margin, prefix, Some(x));
            }
        }
        while self.rounds.len() < t {
            let round = self.rounds.len() + 1;
            self.rounds.push(RoundMargin {
                round,
                checks: 0,
                worst_recursive: f64::INFINITY,
                worst_recipe: f64::INFINITY,
            });
        }
        let r = &mut self.rounds[t - 1];
        r.checks += self.covariate_set.len();
        r.worst_recursive = r.worst_recursive.min(worst);
        r.worst_recipe = r.worst_recipe.min(worst_recipe);
        Ok(())
    }

    fn initial(&mut self, history: &[(Covariate, f64)]) -> Result<()> {
        let xs: Vec<Covariate> = history.iter().map(|(x, _)| x.clone()).collect();
        let ys: Vec<f64> = history.iter().map(|(_, y)| *y).collect();
        let best = if history.is_empty() {
            0.0
        } else {
            self.family.best_comparator_loss(self.model, history)?
        };
        let margin = self.rel.evaluate(&xs, &ys)? + best;
        self.worst_initial = Some(self.worst_initial.map_or(margin, |w| w.min(margin)));
        self.record(ViolationKind::Initial, history.len(), margin, history, None);
        Ok(())
    }

    fn finish(self) -> AdmissibilityReport {
        let admissible = self.violations.is_empty()
            && self.rounds.iter().all(|r| r.worst_recursive >= -ADMISSIBILITY_TOL && r.worst_recipe >= -ADMISSIBILITY_TOL)
            && self.worst_initial.map_or(true, |w| w >= -ADMISSIBILITY_TOL);
        AdmissibilityReport {
            relaxation: self.rel.meta(),
            rounds: self.rounds,
            worst_initial: self.worst_initial,
            violations: self.violations,
            admissible,
        }
    }
}

fn prefix_key(prefix: &[(Covariate, f64)]) -> Vec<u64> {
    let mut key = Vec::with_capacity(prefix.len() * 3);
    for (x, y) in prefix {
        match x {
            Covariate::Id(i) => key.push(*i as u64),
            Covariate::Vector(v) => {
                key.push(u64::MAX - v.len() as u64);
                key.extend(v.iter().map(|c| c.to_bits()));
            }
        }
        key.push(y.to_bits());
    }
    key
}

/// Checks the recursive condition at every prefix of every sampled history
/// (for each `x_t` in `covariate_set`), the two-point distributional
/// condition at the same nodes, and the initial condition on histories of
/// full length. Violations are reported, not raised.
#[allow(clippy::too_many_arguments)]
pub fn check_admissibility<R: RelaxationOracle + ?Sized>(
    rel: &R,
    model: &LossModel,
    family: &ComparatorFamily,
    covariate_set: &[Covariate],
    outcome_grid: &[f64],
    prediction: &PredictionSet,
    histories: &[Vec<(Covariate, f64)>],
) -> Result<AdmissibilityReport> {
    let mut checker = Checker {
        rel,
        model,
        family,
        covariate_set,
        outcome_grid,
        prediction,
        rounds: Vec::new(),
        worst_initial: None,
        violations: Vec::new(),
    };
    let n = rel.horizon();
    let mut seen = HashSet::new();
    for h in histories {
        if h.len() > n {
            return Err(Error::Protocol(format!("history of length {} exceeds horizon {n}", h.len())));
        }
        for t in 0..h.len() {
            if seen.insert(prefix_key(&h[..t])) {
                checker.step(&h[..t])?;
            }
        }
        if h.len() == n {
            checker.initial(h)?;
        }
    }
    Ok(checker.finish())
}

/// [`check_admissibility`] over every history in
/// `(covariate_set × outcome_grid)^n`, walked depth first.
pub fn check_admissibility_exhaustive<R: RelaxationOracle + ?Sized>(
    rel: &R,
    model: &LossModel,
    family: &ComparatorFamily,
    covariate_set: &[Covariate],
    outcome_grid: &[f64],
    prediction: &PredictionSet,
) -> Result<AdmissibilityReport> {
    let mut checker = Checker {
        rel,
        model,
        family,
        covariate_set,
        outcome_grid,
        prediction,
        rounds: Vec::new(),
        worst_initial: None,
        violations: Vec::new(),
    };
    fn walk<R: RelaxationOracle + ?Sized>(c: &mut Checker<'_, R>, prefix: &mut Vec<(Covariate, f64)>, n: usize) -> Result<()> {
        if prefix.len() == n {
            return c.initial(prefix);
        }
        c.step(prefix)?;
        for x in c.covariate_set {
            for &y in c.outcome_grid {
                prefix.push((x.clone(), y));
                walk(c, prefix, n)?;
                prefix.pop();
            }
        }
        Ok(())
    }
    walk(&mut checker, &mut Vec::new(), rel.horizon())?;
    Ok(checker.finish())
}

/// Subtracts `shift` from another relaxation at full histories only; a
/// fixture that breaks the initial condition.
pub struct ShiftedAtHorizon<R> {
    pub inner: R,
    pub shift: f64,
}

impl<R: RelaxationOracle> RelaxationOracle for ShiftedAtHorizon<R> {
    fn meta(&self) -> RelaxationMeta {
        let mut m = self.inner.meta();
        m.name = format!("{} shifted by -{} at t = n", m.name, self.shift);
        m
    }
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }
    fn evaluate(&self, xs: &[Covariate], ys: &[f64]) -> Result<f64> {
        let v = self.inner.evaluate(xs, ys)?;
        Ok(if ys.len() == self.horizon() { v - self.shift } else { v })
    }
}

/// `Rel ≡ 0`.
pub struct ZeroRelaxation {
    pub horizon: usize,
}

impl RelaxationOracle for ZeroRelaxation {
    fn meta(&self) -> RelaxationMeta {
        RelaxationMeta {
            name: "zero".into(),
            family: String::new(),
            model: String::new(),
            parameters: serde_json::Value::Null,
        }
    }
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn evaluate(&self, _: &[Covariate], _: &[f64]) -> Result<f64> {
        Ok(0.0)
    }
}
