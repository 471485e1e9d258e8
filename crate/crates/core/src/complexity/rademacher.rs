//! Sequential and offset Rademacher complexities by path enumeration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::comparators::FiniteTable;
use crate::trees::{node_of, sign_of, LabeledTree};
use crate::{Error, Result};

/// Largest depth whose `2^n` paths are enumerated exactly.
pub const EXACT_GUARD: usize = 20;

/// Work limit (node evaluations) for the supremum over covariate and mean
/// trees.
pub const SUP_GUARD: f64 = 2e8;

/// Upper limit for [`khinchine_check`].
pub const KHINCHINE_GUARD: usize = 24;

/// Name of the generator used for every Monte Carlo estimate.
pub const RNG_NAME: &str = "ChaCha8";

const CHUNKS: u64 = 256;

/// Value of an expectation over sign paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    /// Zero for exact enumeration.
    pub std_err: f64,
    pub exact: bool,
    /// Monte Carlo sample count; `2^n` when exact.
    pub samples: u64,
    pub seed: Option<u64>,
    pub rng: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub samples: u64,
    pub seed: u64,
}

impl Default for MonteCarlo {
    fn default() -> Self {
        MonteCarlo {
            samples: 100_000,
            seed: 0,
        }
    }
}

/// `2^{-n} Σ_ε g(ε)` where `ε` is passed as its lexicographic index.
///
/// Paths are summed in fixed chunks so the result does not depend on the
/// thread count.
pub fn path_expectation<F>(n: usize, g: F) -> Result<f64>
where
    F: Fn(u64) -> f64 + Sync,
{
    if n > EXACT_GUARD {
        return Err(Error::Resource {
            what: "exact path expectation",
            required: 2f64.powi(n as i32),
            limit: 2f64.powi(EXACT_GUARD as i32),
        });
    }
    let total = 1u64 << n;
    let chunks = CHUNKS.min(total);
    let width = total / chunks;
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| (c * width..(c + 1) * width).map(&g).sum::<f64>())
        .collect();
    Ok(partial.iter().sum::<f64>() / total as f64)
}

/// Exact enumeration up to [`EXACT_GUARD`], seeded sampling beyond it.
pub fn path_estimate<F>(n: usize, g: F, mc: MonteCarlo) -> Result<Estimate>
where
    F: Fn(u64) -> f64 + Sync,
{
    if n <= EXACT_GUARD {
        return Ok(Estimate {
            value: path_expectation(n, g)?,
            std_err: 0.0,
            exact: true,
            samples: 1 << n,
            seed: None,
            rng: None,
        });
    }
    if n >= 64 {
        return Err(Error::InvalidArgument(format!("depth {n} exceeds 63")));
    }
    if mc.samples < 2 {
        return Err(Error::InvalidArgument("Monte Carlo needs at least 2 samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
    let mask = (1u64 << n) - 1;
    let draws: Vec<u64> = (0..mc.samples).map(|_| rng.gen::<u64>() & mask).collect();
    let values: Vec<f64> = draws.par_iter().map(|&p| g(p)).collect();
    let m = mc.samples as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(Estimate {
        value: mean,
        std_err: (var / m).sqrt(),
        exact: false,
        samples: mc.samples,
        seed: Some(mc.seed),
        rng: Some(RNG_NAME.into()),
    })
}

/// Real-valued trees `w ∈ W` of a common depth, stored flat for sweeps.
struct TreeSet<'a> {
    depth: usize,
    trees: Vec<&'a LabeledTree<f64>>,
}

impl<'a> TreeSet<'a> {
    fn new(trees: &'a [LabeledTree<f64>]) -> Result<Self> {
        let depth = trees.first().map_or(0, |t| t.depth());
        if let Some(bad) = trees.iter().find(|t| t.depth() != depth) {
            return Err(Error::Shape(format!(
                "trees of depth {} and {depth} mixed",
                bad.depth()
            )));
        }
        Ok(TreeSet {
            depth,
            trees: trees.iter().collect(),
        })
    }

    /// `max_w Σ_t [ε_t (w_t − μ_t) − k·Δ(w_t − μ_t)]` along `path`.
    fn path_max(
        &self,
        path: u64,
        mu: Option<&LabeledTree<f64>>,
        k: f64,
        offset: Option<&(dyn Fn(f64) -> f64 + Sync)>,
    ) -> f64 {
        let n = self.depth;
        let mut best = f64::NEG_INFINITY;
        for w in &self.trees {
            let mut s = 0.0;
            let mut o = 0.0;
            for t in 1..=n {
                let node = node_of(path, n, t);
                let d = w.node(t, node) - mu.map_or(0.0, |m| *m.node(t, node));
                s += sign_of(path, n, t) * d;
                if let Some(off) = offset {
                    o += off(d);
                }
            }
            let v = if offset.is_some() { s - k * o } else { s };
            if v > best {
                best = v;
            }
        }
        best
    }
}

/// `E max_f Σ_t ε_t f(x_t(ε))` over all `2^n` paths.
pub fn seq_rademacher(table: &FiniteTable, x: &LabeledTree<usize>) -> Result<f64> {
    let trees = composed(table, x)?;
    tree_rademacher(&trees)
}

/// [`seq_rademacher`] with a Monte Carlo fallback above [`EXACT_GUARD`].
pub fn seq_rademacher_estimate(table: &FiniteTable, x: &LabeledTree<usize>, mc: MonteCarlo) -> Result<Estimate> {
    let trees = composed(table, x)?;
    let set = TreeSet::new(&trees)?;
    path_estimate(set.depth, |p| set.path_max(p, None, 0.0, None), mc)
}

/// `E max_w Σ_t ε_t w_t(ε)` for a finite set of real trees.
pub fn tree_rademacher(trees: &[LabeledTree<f64>]) -> Result<f64> {
    nonempty(trees)?;
    let set = TreeSet::new(trees)?;
    path_expectation(set.depth, |p| set.path_max(p, None, 0.0, None))
}

/// `E max_f Σ_t [2C ε_t (f(x_t) − μ_t) − Δ(f(x_t) − μ_t)]`.
pub fn offset_rademacher(
    table: &FiniteTable,
    x: &LabeledTree<usize>,
    mu: &LabeledTree<f64>,
    c: f64,
    offset: &(dyn Fn(f64) -> f64 + Sync),
) -> Result<f64> {
    if mu.depth() != x.depth() {
        return Err(Error::Shape(format!(
            "mean tree depth {} differs from covariate tree depth {}",
            mu.depth(),
            x.depth()
        )));
    }
    let trees = composed(table, x)?;
    tree_offset_rademacher(&trees, Some(mu), c, offset)
}

/// Offset complexity of a finite set of real trees, `μ ≡ 0` when absent.
///
/// For `C > 0` this is computed as `2C · E max_w Σ [ε_t d_t − Δ(d_t)/(2C)]`,
/// so a zero offset reproduces `2C` times [`tree_rademacher`] bit for bit.
pub fn tree_offset_rademacher(
    trees: &[LabeledTree<f64>],
    mu: Option<&LabeledTree<f64>>,
    c: f64,
    offset: &(dyn Fn(f64) -> f64 + Sync),
) -> Result<f64> {
    nonempty(trees)?;
    if c < 0.0 {
        return Err(Error::InvalidArgument(format!("C = {c} must be >= 0")));
    }
    let set = TreeSet::new(trees)?;
    if let Some(m) = mu {
        if m.depth() != set.depth {
            return Err(Error::Shape("mean tree depth differs from the class trees".into()));
        }
    }
    if c == 0.0 {
        // max_w −Σ Δ(d_t)
        let neg = |d: f64| -offset(d);
        let value = path_expectation(set.depth, |p| {
            set.trees
                .iter()
                .map(|w| {
                    (1..=set.depth)
                        .map(|t| {
                            let node = node_of(p, set.depth, t);
                            neg(w.node(t, node) - mu.map_or(0.0, |m| *m.node(t, node)))
                        })
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })?;
        return Ok(value);
    }
    let k = 1.0 / (2.0 * c);
    let inner = path_expectation(set.depth, |p| set.path_max(p, mu, k, Some(offset)))?;
    Ok(2.0 * c * inner)
}

fn nonempty<T>(trees: &[T]) -> Result<()> {
    if trees.is_empty() {
        Err(Error::InvalidArgument("class must be nonempty".into()))
    } else {
        Ok(())
    }
}

/// The real trees `f ∘ x` for every row of the table.
pub fn composed(table: &FiniteTable, x: &LabeledTree<usize>) -> Result<Vec<LabeledTree<f64>>> {
    (0..table.len())
        .map(|f| x.compose(|&id| table.value(f, id)))
        .collect()
}

/// Supremum of the offset complexity over covariate and mean trees with
/// labels drawn from finite sets, together with a maximizing pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetSup {
    pub value: f64,
    pub covariate_tree: LabeledTree<usize>,
    pub mean_tree: LabeledTree<f64>,
}

/// `sup_{x, μ} E max_f Σ_t [2C ε_t (f(x_t) − μ_t) − Δ(f(x_t) − μ_t)] − bias_f`.
///
/// Each node's label is chosen after its prefix, so the supremum factors
/// through backward induction over node states (one accumulated score per
/// predictor); the search touches `Σ_k (2|𝒳||M|)^k` states rather than
/// every labelled tree.
pub fn offset_rademacher_sup(
    table: &FiniteTable,
    covariate_set: &[usize],
    mu_grid: &[f64],
    n: usize,
    c: f64,
    offset: &(dyn Fn(f64) -> f64 + Sync),
) -> Result<OffsetSup> {
    offset_rademacher_sup_biased(table, covariate_set, mu_grid, n, c, offset, &vec![0.0; table.len()])
}

/// [`offset_rademacher_sup`] with a fixed penalty `bias_f` subtracted from
/// each predictor's score.
pub fn offset_rademacher_sup_biased(
    table: &FiniteTable,
    covariate_set: &[usize],
    mu_grid: &[f64],
    n: usize,
    c: f64,
    offset: &(dyn Fn(f64) -> f64 + Sync),
    bias: &[f64],
) -> Result<OffsetSup> {
    if bias.len() != table.len() {
        return Err(Error::Shape(format!("{} biases for {} predictors", bias.len(), table.len())));
    }
    if n > 0 && (covariate_set.is_empty() || mu_grid.is_empty()) {
        return Err(Error::InvalidArgument("covariate set and mean grid must be nonempty".into()));
    }
    for &x in covariate_set {
        if x >= table.covariate_count() {
            return Err(Error::Lookup(format!("covariate {x} of {}", table.covariate_count())));
        }
    }
    let branching = 2.0 * (covariate_set.len() * mu_grid.len()) as f64;
    let work = (0..=n).map(|k| branching.powi(k as i32)).sum::<f64>() * table.len() as f64;
    if work > SUP_GUARD {
        return Err(Error::Resource {
            what: "offset supremum search",
            required: work,
            limit: SUP_GUARD,
        });
    }
    let solver = SupSolver {
        table,
        choices: covariate_set
            .iter()
            .flat_map(|&x| mu_grid.iter().map(move |&m| (x, m)))
            .collect(),
        c,
        offset,
    };
    let start: Vec<f64> = bias.iter().map(|b| -b).collect();
    let value = solver.value(&start, n, true);
    let mut xs = LabeledTree::constant(n, covariate_set.first().copied().unwrap_or(0));
    let mut ms = LabeledTree::constant(n, 0.0);
    let mut levels_x: Vec<Vec<usize>> = xs.levels().to_vec();
    let mut levels_m: Vec<Vec<f64>> = ms.levels().to_vec();
    solver.reconstruct(&start, n, 1, 0, &mut levels_x, &mut levels_m);
    xs = LabeledTree::new(levels_x)?;
    ms = LabeledTree::new(levels_m)?;
    Ok(OffsetSup {
        value,
        covariate_tree: xs,
        mean_tree: ms,
    })
}

struct SupSolver<'a> {
    table: &'a FiniteTable,
    choices: Vec<(usize, f64)>,
    c: f64,
    offset: &'a (dyn Fn(f64) -> f64 + Sync),
}

impl SupSolver<'_> {
    fn step(&self, state: &[f64], choice: (usize, f64), eps: f64) -> Vec<f64> {
        let (x, m) = choice;
        state
            .iter()
            .enumerate()
            .map(|(f, s)| {
                let d = self.table.values[f][x] - m;
                s + 2.0 * self.c * eps * d - (self.offset)(d)
            })
            .collect()
    }

    fn choice_value(&self, state: &[f64], remaining: usize, choice: (usize, f64)) -> f64 {
        let up = self.value(&self.step(state, choice, 1.0), remaining - 1, false);
        let down = self.value(&self.step(state, choice, -1.0), remaining - 1, false);
        0.5 * (up + down)
    }

    /// Best choice at the current node; ties go to the first choice.
    fn best(&self, state: &[f64], remaining: usize, parallel: bool) -> (usize, f64) {
        let values: Vec<f64> = if parallel {
            self.choices
                .par_iter()
                .map(|&ch| self.choice_value(state, remaining, ch))
                .collect()
        } else {
            self.choices
                .iter()
                .map(|&ch| self.choice_value(state, remaining, ch))
                .collect()
        };
        values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
    }

    fn value(&self, state: &[f64], remaining: usize, parallel: bool) -> f64 {
        if remaining == 0 {
            return state.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        self.best(state, remaining, parallel).1
    }

    fn reconstruct(
        &self,
        state: &[f64],
        remaining: usize,
        t: usize,
        node: usize,
        xs: &mut [Vec<usize>],
        ms: &mut [Vec<f64>],
    ) {
        if remaining == 0 {
            return;
        }
        let (i, _) = self.best(state, remaining, true);
        let choice = self.choices[i];
        xs[t - 1][node] = choice.0;
        ms[t - 1][node] = choice.1;
        let down = self.step(state, choice, -1.0);
        let up = self.step(state, choice, 1.0);
        self.reconstruct(&down, remaining - 1, t + 1, 2 * node, xs, ms);
        self.reconstruct(&up, remaining - 1, t + 1, 2 * node + 1, xs, ms);
    }
}

/// `(E|Σ_{j≤k} ε_j|, E|Σ ε_j| ≥ √(k/2))` by enumerating all sign vectors.
pub fn khinchine_check(k: usize) -> Result<(f64, bool)> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if k > KHINCHINE_GUARD {
        return Err(Error::Resource {
            what: "sign vector enumeration",
            required: 2f64.powi(k as i32),
            limit: 2f64.powi(KHINCHINE_GUARD as i32),
        });
    }
    let total: u64 = (0..1u64 << k)
        .into_par_iter()
        .map(|v| (2 * i64::from(v.count_ones()) - k as i64).unsigned_abs())
        .sum();
    let mean = total as f64 / (1u64 << k) as f64;
    Ok((mean, mean >= (k as f64 / 2.0).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::all_paths;
    use rand::{Rng, SeedableRng};

    fn pm() -> FiniteTable {
        FiniteTable::new(vec![vec![1.0], vec![-1.0]]).unwrap()
    }

    /// Independent oracle: walk explicit sign paths through `label_at`.
    fn brute_offset(
        table: &FiniteTable,
        x: &LabeledTree<usize>,
        mu: &LabeledTree<f64>,
        c: f64,
        offset: impl Fn(f64) -> f64,
    ) -> f64 {
        let n = x.depth();
        let mut total = 0.0;
        for p in all_paths(n).unwrap() {
            let mut best = f64::NEG_INFINITY;
            for f in 0..table.len() {
                let mut v = 0.0;
                for t in 1..=n {
                    let xt = *x.label_at(t, &p).unwrap();
                    let d = table.values[f][xt] - mu.label_at(t, &p).unwrap();
                    v += 2.0 * c * p.signs()[t - 1] as f64 * d - offset(d);
                }
                best = best.max(v);
            }
            total += best;
        }
        total / 2f64.powi(n as i32)
    }

    #[test]
    fn seq_rademacher_examples() {
        let single = FiniteTable::new(vec![vec![0.3, -0.7]]).unwrap();
        let x = LabeledTree::from_flat(2, &[0, 1, 0]).unwrap();
        assert!(seq_rademacher(&single, &x).unwrap().abs() < 1e-15);
        assert_eq!(seq_rademacher(&pm(), &LabeledTree::constant(1, 0)).unwrap(), 1.0);
        assert_eq!(seq_rademacher(&pm(), &LabeledTree::constant(2, 0)).unwrap(), 1.0);
        assert_eq!(seq_rademacher(&pm(), &LabeledTree::constant(0, 0)).unwrap(), 0.0);
    }

    #[test]
    fn offset_examples() {
        let x = LabeledTree::constant(2, 0);
        let mu = LabeledTree::constant(2, 0.0);
        let v = offset_rademacher(&pm(), &x, &mu, 0.5, &|d| d * d).unwrap();
        assert!((v + 1.0).abs() < 1e-15);
        let zero = LabeledTree::constant(0, 0);
        assert_eq!(offset_rademacher(&pm(), &zero, &LabeledTree::constant(0, 0.0), 1.0, &|d| d * d).unwrap(), 0.0);
        assert!(matches!(
            offset_rademacher(&pm(), &x, &LabeledTree::constant(1, 0.0), 1.0, &|_| 0.0),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn offset_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.gen_range(0..6);
            let table = FiniteTable::new(
                (0..4).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
            )
            .unwrap();
            let x = LabeledTree::from_fn(n, |_, _| rng.gen_range(0..3));
            let mu = LabeledTree::from_fn(n, |_, _| rng.gen_range(-0.5..0.5));
            let c = rng.gen_range(0.1..2.0);
            let got = offset_rademacher(&table, &x, &mu, c, &|d| 0.7 * d * d).unwrap();
            let want = brute_offset(&table, &x, &mu, c, |d| 0.7 * d * d);
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn zero_offset_collapses_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 0..=10 {
            let table = FiniteTable::new(
                (0..3).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
            )
            .unwrap();
            let x = LabeledTree::from_fn(n, |_, _| rng.gen_range(0..4));
            let mu = LabeledTree::constant(n, 0.0);
            let c = rng.gen_range(0.01..3.0);
            let off = offset_rademacher(&table, &x, &mu, c, &|_| 0.0).unwrap();
            let rad = seq_rademacher(&table, &x).unwrap();
            assert_eq!(off, 2.0 * c * rad);
        }
    }

    #[test]
    fn sup_examples() {
        let sq = |d: f64| d * d;
        assert_eq!(offset_rademacher_sup(&pm(), &[0], &[0.0], 0, 1.0, &sq).unwrap().value, 0.0);
        let single = FiniteTable::new(vec![vec![0.4, -0.2]]).unwrap();
        let s = offset_rademacher_sup(&single, &[0, 1], &[-1.0, 0.0, 1.0], 2, 1.0, &|_| 0.0).unwrap();
        assert!(s.value.abs() < 1e-15);
        let s = offset_rademacher_sup(&pm(), &[0], &[0.0], 1, 0.5, &sq).unwrap();
        assert!(s.value.abs() < 1e-15);
    }

    #[test]
    fn sup_agrees_with_tree_enumeration_and_its_argmax() {
        let table = FiniteTable::new(vec![vec![1.0, 0.0, -0.5], vec![-1.0, 0.5, 0.25], vec![0.0, -1.0, 1.0]]).unwrap();
        let cov = [0usize, 1, 2];
        let grid = [-0.5, 0.0, 0.5];
        let off = |d: f64| 0.5 * d * d;
        let sup = offset_rademacher_sup(&table, &cov, &grid, 2, 0.75, &off).unwrap();
        let mut brute = f64::NEG_INFINITY;
        for xl in crate::trees::all_label_assignments(2, 3) {
            let x = LabeledTree::from_flat(2, &xl.iter().map(|&i| cov[i]).collect::<Vec<_>>()).unwrap();
            for ml in crate::trees::all_label_assignments(2, 3) {
                let mu = LabeledTree::from_flat(2, &ml.iter().map(|&i| grid[i]).collect::<Vec<_>>()).unwrap();
                brute = brute.max(brute_offset(&table, &x, &mu, 0.75, off));
            }
        }
        assert!((sup.value - brute).abs() < 1e-12, "{} vs {brute}", sup.value);
        let at = brute_offset(&table, &sup.covariate_tree, &sup.mean_tree, 0.75, off);
        assert!((at - sup.value).abs() < 1e-12);
    }

    #[test]
    fn sup_guard() {
        let table = FiniteTable::new(vec![vec![0.0; 10]]).unwrap();
        let cov: Vec<usize> = (0..10).collect();
        let grid = vec![0.0; 10];
        assert!(matches!(
            offset_rademacher_sup(&table, &cov, &grid, 6, 1.0, &|_| 0.0),
            Err(Error::Resource { .. })
        ));
    }

    #[test]
    fn monte_carlo_fallback_reports_error() {
        let n = 22;
        let est = path_estimate(n, |p| sign_of(p, n, 1), MonteCarlo { samples: 20_000, seed: 5 }).unwrap();
        assert!(!est.exact);
        assert_eq!(est.rng.as_deref(), Some(RNG_NAME));
        assert!(est.value.abs() < 5.0 * est.std_err + 1e-12);
        assert!(path_expectation(n, |_| 0.0).is_err());
        let exact = path_estimate(3, |p| p as f64, MonteCarlo::default()).unwrap();
        assert!(exact.exact && exact.value == 3.5);
    }

    #[test]
    fn khinchine_examples() {
        assert_eq!(khinchine_check(1).unwrap(), (1.0, true));
        assert_eq!(khinchine_check(2).unwrap(), (1.0, true));
        assert_eq!(khinchine_check(4).unwrap(), (1.5, true));
        assert!(khinchine_check(25).is_err());
        assert!(khinchine_check(0).is_err());
    }
}
