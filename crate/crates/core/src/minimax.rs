//! Exact minimax regret of small discretized games by backward induction.
//!
//! Covariates, outcomes and predictions range over finite grids. With the
//! sup-players on grids the value is a lower bound on the continuum value;
//! with the learner on a grid it is an upper bound on the value of the game
//! whose learner may predict anywhere. Comparisons should use matched grids.

use std::cell::RefCell;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::comparators::{ComparatorFamily, FiniteTable};
use crate::losses::{LossConfig, LossModel};
use crate::{Error, Result};

/// Limit on the estimated number of visited states times the class size.
pub const STATE_GUARD: f64 = 5e7;

/// Resolution at which cumulative losses are merged in the memo table.
pub const MEMO_QUANTUM: f64 = 1e-12;

const GRID_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub family: ComparatorFamily,
    pub loss: LossConfig,
    pub horizon: usize,
    pub covariate_set: Vec<usize>,
    pub outcome_grid: Vec<f64>,
    pub prediction_grid: Vec<f64>,
}

impl GameSpec {
    pub fn new(
        table: FiniteTable,
        model: &LossModel,
        horizon: usize,
        covariate_set: Vec<usize>,
        outcome_grid: Vec<f64>,
        prediction_grid: Vec<f64>,
    ) -> Result<Self> {
        let spec = GameSpec {
            family: ComparatorFamily::FiniteTable(table),
            loss: model.to_config(),
            horizon,
            covariate_set,
            outcome_grid,
            prediction_grid,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: GameSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_horizon(&self, horizon: usize) -> Self {
        GameSpec {
            horizon,
            ..self.clone()
        }
    }

    pub fn table(&self) -> Result<&FiniteTable> {
        self.family.as_table()
    }

    pub fn model(&self) -> Result<LossModel> {
        LossModel::from_config(&self.loss)
    }

    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        let table = self.table()?;
        let model = self.model()?;
        if self.covariate_set.is_empty() || self.outcome_grid.is_empty() || self.prediction_grid.is_empty() {
            return Err(Error::InvalidArgument("game grids must be nonempty".into()));
        }
        for &x in &self.covariate_set {
            if x >= table.covariate_count() {
                return Err(Error::Lookup(format!("covariate {x} of {}", table.covariate_count())));
            }
        }
        for &y in &self.outcome_grid {
            model.outcome_range.check("outcome grid point", y)?;
        }
        for &p in &self.prediction_grid {
            model.prediction_range.check("prediction grid point", p)?;
        }
        Ok(())
    }

    /// Largest gap between neighbouring prediction grid points, reported
    /// next to every solved value.
    pub fn grid_resolution(&self) -> f64 {
        let mut g = self.prediction_grid.clone();
        g.sort_by(f64::total_cmp);
        g.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    fn state_estimate(&self) -> f64 {
        let branching = (self.covariate_set.len() * self.outcome_grid.len()) as f64;
        let states: f64 = (0..=self.horizon).map(|t| branching.powi(t as i32)).sum();
        states * self.table().map_or(1, FiniteTable::len) as f64
    }
}

/// Backward-induction solver with a memo on `(t, quantized losses)`.
pub struct Solver {
    spec: GameSpec,
    table: FiniteTable,
    model: LossModel,
    memo: RefCell<HashMap<(usize, Vec<i64>), f64>>,
}

impl Solver {
    pub fn new(spec: &GameSpec) -> Result<Self> {
        spec.validate()?;
        let estimate = spec.state_estimate();
        if estimate > STATE_GUARD {
            return Err(Error::Resource {
                what: "minimax states",
                required: estimate,
                limit: STATE_GUARD,
            });
        }
        Ok(Solver {
            table: spec.table()?.clone(),
            model: spec.model()?,
            spec: spec.clone(),
            memo: RefCell::new(HashMap::new()),
        })
    }

    pub fn spec(&self) -> &GameSpec {
        &self.spec
    }

    pub fn value(&self) -> f64 {
        self.value_at(0, &vec![0.0; self.table.len()])
    }

    pub fn memo_size(&self) -> usize {
        self.memo.borrow().len()
    }

    fn key(t: usize, losses: &[f64]) -> (usize, Vec<i64>) {
        (t, losses.iter().map(|l| (l / MEMO_QUANTUM).round() as i64).collect())
    }

    fn advance(&self, losses: &[f64], x: usize, y: f64) -> Vec<f64> {
        losses
            .iter()
            .enumerate()
            .map(|(f, l)| l + self.model.value_unchecked(self.table.values[f][x], y))
            .collect()
    }

    /// Value of the remaining game after `t` rounds with cumulative
    /// comparator losses `losses`.
    pub fn value_at(&self, t: usize, losses: &[f64]) -> f64 {
        if t == self.spec.horizon {
            return -losses.iter().copied().fold(f64::INFINITY, f64::min);
        }
        let key = Self::key(t, losses);
        if let Some(&v) = self.memo.borrow().get(&key) {
            return v;
        }
        let v = self
            .spec
            .covariate_set
            .iter()
            .map(|&x| self.covariate_value(t, losses, x))
            .fold(f64::NEG_INFINITY, f64::max);
        self.memo.borrow_mut().insert(key, v);
        v
    }

    /// `W_y = V(t+1, L + ℓ(f(x), y))` for each outcome grid point.
    fn continuation(&self, t: usize, losses: &[f64], x: usize) -> Vec<f64> {
        self.spec
            .outcome_grid
            .iter()
            .map(|&y| self.value_at(t + 1, &self.advance(losses, x, y)))
            .collect()
    }

    fn worst_case(&self, yhat: f64, cont: &[f64]) -> f64 {
        self.spec
            .outcome_grid
            .iter()
            .zip(cont)
            .map(|(&y, w)| self.model.value_unchecked(yhat, y) + w)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn covariate_value(&self, t: usize, losses: &[f64], x: usize) -> f64 {
        let cont = self.continuation(t, losses, x);
        self.spec
            .prediction_grid
            .iter()
            .map(|&p| self.worst_case(p, &cont))
            .fold(f64::INFINITY, f64::min)
    }

    fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
        values
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| if v > bv { (i, v) } else { (bi, bv) })
            .0
    }

    fn argmin_first(values: impl Iterator<Item = f64>) -> usize {
        values
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bv), (i, v)| if v < bv { (i, v) } else { (bi, bv) })
            .0
    }

    fn grid_index(grid: &[f64], v: f64) -> Option<usize> {
        grid.iter().position(|g| (g - v).abs() <= GRID_SLACK)
    }

    /// Cumulative comparator losses after a prefix of `(x, y)` rounds.
    pub fn replay(&self, prefix: &[(usize, f64)]) -> Result<Vec<f64>> {
        if prefix.len() >= self.spec.horizon + 1 {
            return Err(Error::Protocol(format!(
                "prefix of length {} exceeds horizon {}",
                prefix.len(),
                self.spec.horizon
            )));
        }
        let mut losses = vec![0.0; self.table.len()];
        for (t, &(x, y)) in prefix.iter().enumerate() {
            if !self.spec.covariate_set.contains(&x) {
                return Err(Error::Protocol(format!("round {}: covariate {x} not in the game", t + 1)));
            }
            if Self::grid_index(&self.spec.outcome_grid, y).is_none() {
                return Err(Error::Protocol(format!("round {}: outcome {y} not on the grid", t + 1)));
            }
            losses = self.advance(&losses, x, y);
        }
        Ok(losses)
    }

    fn check_open(&self, prefix: &[(usize, f64)]) -> Result<Vec<f64>> {
        if prefix.len() >= self.spec.horizon {
            return Err(Error::Protocol(format!("game of horizon {} is over", self.spec.horizon)));
        }
        self.replay(prefix)
    }

    /// The maximizing covariate for the next round.
    pub fn choose_covariate(&self, prefix: &[(usize, f64)]) -> Result<usize> {
        let losses = self.check_open(prefix)?;
        let t = prefix.len();
        let i = Self::argmax_first(self.spec.covariate_set.iter().map(|&x| self.covariate_value(t, &losses, x)));
        Ok(self.spec.covariate_set[i])
    }

    /// The maximizing outcome against prediction `yhat` at covariate `x`.
    pub fn choose_outcome(&self, prefix: &[(usize, f64)], x: usize, yhat: f64) -> Result<f64> {
        let losses = self.check_open(prefix)?;
        if !self.spec.covariate_set.contains(&x) {
            return Err(Error::Protocol(format!("covariate {x} not in the game")));
        }
        self.model.prediction_range.check("prediction", yhat)?;
        let cont = self.continuation(prefix.len(), &losses, x);
        let i = Self::argmax_first(
            self.spec
                .outcome_grid
                .iter()
                .zip(&cont)
                .map(|(&y, w)| self.model.value_unchecked(yhat, y) + w),
        );
        Ok(self.spec.outcome_grid[i])
    }

    /// The minimax prediction on the grid at covariate `x`.
    pub fn choose_prediction(&self, prefix: &[(usize, f64)], x: usize) -> Result<f64> {
        let losses = self.check_open(prefix)?;
        if !self.spec.covariate_set.contains(&x) {
            return Err(Error::Protocol(format!("covariate {x} not in the game")));
        }
        let cont = self.continuation(prefix.len(), &losses, x);
        let i = Self::argmin_first(self.spec.prediction_grid.iter().map(|&p| self.worst_case(p, &cont)));
        Ok(self.spec.prediction_grid[i])
    }

    /// Plays the optimal adversary against `learner` and returns the regret
    /// together with the transcript `(x, ŷ, y)`.
    pub fn play<L>(&self, mut learner: L) -> Result<(f64, Vec<(usize, f64, f64)>)>
    where
        L: FnMut(&[(usize, f64)], usize) -> Result<f64>,
    {
        let mut prefix = Vec::new();
        let mut transcript = Vec::new();
        let mut learner_loss = 0.0;
        for _ in 0..self.spec.horizon {
            let x = self.choose_covariate(&prefix)?;
            let yhat = learner(&prefix, x)?;
            let y = self.choose_outcome(&prefix, x, yhat)?;
            learner_loss += self.model.value(yhat, y)?;
            transcript.push((x, yhat, y));
            prefix.push((x, y));
        }
        let losses = self.replay(&prefix)?;
        let best = losses.iter().copied().fold(f64::INFINITY, f64::min);
        let best = if prefix.is_empty() { 0.0 } else { best };
        Ok((learner_loss - best, transcript))
    }

    /// Every decision of both players at every reachable prefix.
    pub fn export(&self) -> Result<SolvedGame> {
        let mut nodes = Vec::new();
        let mut stack: Vec<Vec<(usize, f64)>> = vec![Vec::new()];
        while let Some(prefix) = stack.pop() {
            if prefix.len() == self.spec.horizon {
                continue;
            }
            let losses = self.replay(&prefix)?;
            let t = prefix.len();
            let mut by_covariate = Vec::new();
            for &x in &self.spec.covariate_set {
                let learner = self.choose_prediction(&prefix, x)?;
                let outcomes = self
                    .spec
                    .prediction_grid
                    .iter()
                    .map(|&p| Ok((p, self.choose_outcome(&prefix, x, p)?)))
                    .collect::<Result<Vec<_>>>()?;
                by_covariate.push(CovariateDecision {
                    covariate: x,
                    value: self.covariate_value(t, &losses, x),
                    learner_prediction: learner,
                    outcome_response: outcomes,
                });
                for &y in &self.spec.outcome_grid {
                    let mut next = prefix.clone();
                    next.push((x, y));
                    stack.push(next);
                }
            }
            nodes.push(StrategyNode {
                prefix: prefix.clone(),
                value: self.value_at(t, &losses),
                covariate: self.choose_covariate(&prefix)?,
                decisions: by_covariate,
            });
        }
        nodes.sort_by(|a, b| {
            a.prefix
                .len()
                .cmp(&b.prefix.len())
                .then_with(|| format!("{:?}", a.prefix).cmp(&format!("{:?}", b.prefix)))
        });
        Ok(SolvedGame {
            spec: self.spec.clone(),
            value: self.value(),
            grid_resolution: self.spec.grid_resolution(),
            nodes,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateDecision {
    pub covariate: usize,
    pub value: f64,
    pub learner_prediction: f64,
    /// Adversary outcome for each prediction grid point.
    pub outcome_response: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyNode {
    pub prefix: Vec<(usize, f64)>,
    pub value: f64,
    pub covariate: usize,
    pub decisions: Vec<CovariateDecision>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvedGame {
    pub spec: GameSpec,
    pub value: f64,
    pub grid_resolution: f64,
    pub nodes: Vec<StrategyNode>,
}

/// The discretized minimax regret `V_n` of the game.
pub fn minimax_value(spec: &GameSpec) -> Result<f64> {
    Ok(Solver::new(spec)?.value())
}

/// A solved game queried as the sup-player.
pub fn optimal_adversary(spec: &GameSpec) -> Result<Solver> {
    let solver = Solver::new(spec)?;
    solver.value();
    Ok(solver)
}

/// `V_n` for each horizon.
pub fn value_monotonicity(spec: &GameSpec, horizons: &[usize]) -> Result<Vec<f64>> {
    horizons.iter().map(|&n| minimax_value(&spec.with_horizon(n))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm_absolute(n: usize) -> GameSpec {
        GameSpec::new(
            FiniteTable::new(vec![vec![1.0], vec![-1.0]]).unwrap(),
            &LossModel::absolute(1.0),
            n,
            vec![0],
            vec![-1.0, 1.0],
            vec![-1.0, 0.0, 1.0],
        )
        .unwrap()
    }

    /// Independent oracle: plain recursion over full histories, no memo.
    fn brute(spec: &GameSpec, hist: &mut Vec<(usize, f64)>) -> f64 {
        let table = spec.table().unwrap();
        let model = spec.model().unwrap();
        if hist.len() == spec.horizon {
            return -(0..table.len())
                .map(|f| hist.iter().map(|&(x, y)| model.value_unchecked(table.values[f][x], y)).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
        }
        let mut best_x = f64::NEG_INFINITY;
        for &x in &spec.covariate_set {
            let mut best_p = f64::INFINITY;
            for &p in &spec.prediction_grid {
                let mut worst = f64::NEG_INFINITY;
                for &y in &spec.outcome_grid {
                    hist.push((x, y));
                    worst = worst.max(model.value_unchecked(p, y) + brute(spec, hist));
                    hist.pop();
                }
                best_p = best_p.min(worst);
            }
            best_x = best_x.max(best_p);
        }
        best_x
    }

    #[test]
    fn value_examples() {
        assert_eq!(minimax_value(&pm_absolute(1)).unwrap(), 1.0);
        assert_eq!(minimax_value(&pm_absolute(0)).unwrap(), 0.0);
        let single = GameSpec::new(
            FiniteTable::new(vec![vec![0.5, -0.5]]).unwrap(),
            &LossModel::square(1.0),
            3,
            vec![0, 1],
            vec![-1.0, 0.0, 1.0],
            vec![-0.5, 0.0, 0.5],
        )
        .unwrap();
        assert!(minimax_value(&single).unwrap().abs() < 1e-12);
    }

    #[test]
    fn memoized_solver_matches_plain_recursion() {
        let spec = GameSpec::new(
            FiniteTable::new(vec![vec![0.5, -1.0], vec![-0.5, 0.0], vec![1.0, 0.5]]).unwrap(),
            &LossModel::square(1.0),
            3,
            vec![0, 1],
            vec![-1.0, 1.0],
            vec![-1.0, -0.5, 0.0, 0.5, 1.0],
        )
        .unwrap();
        let v = minimax_value(&spec).unwrap();
        assert!((v - brute(&spec, &mut Vec::new())).abs() < 1e-12);
    }

    #[test]
    fn adversary_examples() {
        let spec = pm_absolute(1);
        let adv = optimal_adversary(&spec).unwrap();
        assert_eq!(adv.choose_outcome(&[], 0, 0.0).unwrap(), -1.0);
        assert_eq!(adv.choose_outcome(&[], 0, 0.5).unwrap(), -1.0);
        assert_eq!(adv.choose_outcome(&[], 0, -0.5).unwrap(), 1.0);
        let (regret, _) = adv.play(|_, _| Ok(0.0)).unwrap();
        assert_eq!(regret, 1.0);
    }

    #[test]
    fn replay_against_optimal_learner_reproduces_value() {
        for n in 1..=3 {
            let spec = pm_absolute(n);
            let adv = optimal_adversary(&spec).unwrap();
            let (regret, tr1) = adv.play(|p, x| adv.choose_prediction(p, x)).unwrap();
            assert!((regret - adv.value()).abs() < 1e-9);
            let (_, tr2) = adv.play(|p, x| adv.choose_prediction(p, x)).unwrap();
            assert_eq!(tr1, tr2);
        }
    }

    #[test]
    fn protocol_errors() {
        let adv = optimal_adversary(&pm_absolute(1)).unwrap();
        assert!(matches!(adv.choose_covariate(&[(0, 1.0)]), Err(Error::Protocol(_))));
        let adv = optimal_adversary(&pm_absolute(2)).unwrap();
        assert!(matches!(adv.choose_covariate(&[(3, 1.0)]), Err(Error::Protocol(_))));
        assert!(matches!(adv.choose_covariate(&[(0, 0.3)]), Err(Error::Protocol(_))));
    }

    #[test]
    fn monotone_in_horizon() {
        let v = value_monotonicity(&pm_absolute(0), &[0, 1, 2, 3]).unwrap();
        assert_eq!(v[0], 0.0);
        assert_eq!(v[1], 1.0);
        assert!(v.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn export_round_trips() {
        let adv = optimal_adversary(&pm_absolute(2)).unwrap();
        let solved = adv.export().unwrap();
        assert_eq!(solved.nodes[0].prefix.len(), 0);
        assert_eq!(solved.nodes.len(), 1 + 2);
        let json = serde_json::to_string(&solved).unwrap();
        let back: SolvedGame = serde_json::from_str(&json).unwrap();
        assert_eq!(back, solved);
        let spec_json = serde_json::to_string(&solved.spec).unwrap();
        assert_eq!(GameSpec::from_json(&spec_json).unwrap(), solved.spec);
    }

    #[test]
    fn guard_and_validation() {
        let big = GameSpec {
            horizon: 12,
            ..pm_absolute(1)
        };
        let big = GameSpec {
            covariate_set: vec![0; 4],
            ..big
        };
        assert!(matches!(Solver::new(&big), Err(Error::Resource { .. })));
        let bad = GameSpec {
            outcome_grid: vec![2.0],
            ..pm_absolute(1)
        };
        assert!(bad.validate().is_err());
    }
}
