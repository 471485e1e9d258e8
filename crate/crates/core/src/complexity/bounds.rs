//! Closed-form and optimized upper bounds built from class size and
//! sequential entropy.

use crate::numeric::{adaptive_simpson, golden_section_min_log};
use crate::trees::{all_paths, node_of, LabeledTree};
use crate::{Error, ExtReal, Result};

/// Relative tolerance of every scalar search over `λ`, `ρ` and `γ`.
pub const SEARCH_TOL: f64 = 1e-8;

/// Relative tolerance of the entropy integral.
pub const QUAD_TOL: f64 = 1e-8;

const LOG_LAMBDA_RANGE: (f64, f64) = (-30.0, 30.0);

/// `inf_{λ>0} { log|W|/λ + n Γ*(2C²λ) }`.
///
/// `+∞` when every `λ` gives an infinite value. `Γ*` errors count as `+∞`.
pub fn finite_class_offset_bound(
    size_w: usize,
    n: usize,
    c: f64,
    gamma_star: &dyn Fn(f64) -> Result<ExtReal>,
) -> Result<ExtReal> {
    if size_w == 0 {
        return Err(Error::Domain {
            what: "collection size",
            value: 0.0,
            interval: "[1, inf)".into(),
        });
    }
    let log_w = (size_w as f64).ln();
    Ok(lambda_search(log_w, n, c, gamma_star))
}

/// `inf_λ { a/λ + n Γ*(2C²λ) }` over `log λ ∈ [−30, 30]`.
fn lambda_search(a: f64, n: usize, c: f64, gamma_star: &dyn Fn(f64) -> Result<ExtReal>) -> ExtReal {
    let objective = |lambda: f64| -> ExtReal {
        let g = gamma_star(2.0 * c * c * lambda).unwrap_or(ExtReal::PosInfinity);
        ExtReal::Finite(a / lambda) + g.scale(n as f64)
    };
    golden_section_min_log(objective, LOG_LAMBDA_RANGE.0, LOG_LAMBDA_RANGE.1, SEARCH_TOL).value
}

/// `G · sqrt(2 log|W| · max_{w, ε} Σ_t w_t(ε)²)`.
pub fn finite_class_linear_bound(trees: &[LabeledTree<f64>], g: f64) -> Result<f64> {
    if trees.is_empty() {
        return Err(Error::Domain {
            what: "collection size",
            value: 0.0,
            interval: "[1, inf)".into(),
        });
    }
    let n = trees[0].depth();
    if trees.iter().any(|t| t.depth() != n) {
        return Err(Error::Shape("trees of different depths".into()));
    }
    let mut max_sq = 0.0f64;
    for w in trees {
        for p in 0..1u64 << n {
            let s: f64 = (1..=n).map(|t| w.node(t, node_of(p, n, t)).powi(2)).sum();
            max_sq = max_sq.max(s);
        }
    }
    Ok(g * (2.0 * (trees.len() as f64).ln() * max_sq).sqrt())
}

/// `E max_w Σ_t [2C ε_t w_t(ε) − Δ(w_t(ε))]` walking explicit sign paths;
/// the left side of the finite-collection lemma.
pub fn finite_class_offset_expectation(
    trees: &[LabeledTree<f64>],
    c: f64,
    offset: &dyn Fn(f64) -> f64,
) -> Result<f64> {
    if trees.is_empty() {
        return Err(Error::InvalidArgument("collection must be nonempty".into()));
    }
    let n = trees[0].depth();
    let mut total = 0.0;
    for p in all_paths(n)? {
        let best = trees
            .iter()
            .map(|w| {
                (1..=n)
                    .map(|t| {
                        let v = *w.label_at(t, &p).expect("depth checked");
                        2.0 * c * p.signs()[t - 1] as f64 * v - offset(v)
                    })
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        total += best;
    }
    Ok(total / 2f64.powi(n as i32))
}

/// `4ρn + 12√n ∫_ρ^γ sqrt(log_cover(δ)) dδ`.
pub fn dudley_bound(log_cover: &dyn Fn(f64) -> f64, n: usize, rho: f64, gamma: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Domain {
            what: "rho",
            value: rho,
            interval: "(0, gamma]".into(),
        });
    }
    if gamma < rho {
        return Err(Error::Domain {
            what: "gamma",
            value: gamma,
            interval: format!("[{rho}, inf)"),
        });
    }
    let nf = n as f64;
    let integral = adaptive_simpson(|d| log_cover(d).max(0.0).sqrt(), rho, gamma, QUAD_TOL);
    Ok(4.0 * rho * nf + 12.0 * nf.sqrt() * integral)
}

/// Dudley bound for a log-cover known on an increasing grid of scales,
/// using the step envelope `log N(δ) ≤ log N(δ_i)` on `[δ_i, δ_{i+1})`.
///
/// Returns the minimum over `ρ` in the grid (below `gamma`) and the
/// minimizing `ρ`.
pub fn dudley_bound_steps(scales: &[f64], log_covers: &[f64], n: usize, gamma: f64) -> Result<(f64, f64)> {
    if scales.is_empty() || scales.len() != log_covers.len() {
        return Err(Error::Shape("scales and log covers must be nonempty and aligned".into()));
    }
    if scales.windows(2).any(|w| w[0] >= w[1]) || scales[0] <= 0.0 {
        return Err(Error::InvalidArgument("scales must be positive and increasing".into()));
    }
    let nf = n as f64;
    let mut best = (f64::INFINITY, scales[0]);
    for (i, &rho) in scales.iter().enumerate().filter(|(_, &r)| r <= gamma) {
        let mut integral = 0.0;
        for j in i..scales.len() {
            let lo = scales[j];
            let hi = scales.get(j + 1).copied().unwrap_or(gamma).min(gamma);
            if hi > lo {
                integral += (hi - lo) * log_covers[j].max(0.0).sqrt();
            }
        }
        let v = 4.0 * rho * nf + 12.0 * nf.sqrt() * integral;
        if v < best.0 {
            best = (v, rho);
        }
    }
    Ok(best)
}

/// `inf_{γ>0} { C · inf_{ρ∈(0,γ)} [4ρn + 12√n ∫_ρ^γ √log N] + inf_λ [log N(γ/2)/λ + n Γ*(2C²λ)] }`
/// by nested golden-section searches on logarithmic axes.
pub fn chained_offset_bound(
    log_cover_linf: &dyn Fn(f64) -> f64,
    n: usize,
    c: f64,
    gamma_star: &dyn Fn(f64) -> Result<ExtReal>,
    log_gamma_range: (f64, f64),
) -> Result<ChainedBound> {
    if n == 0 {
        return Ok(ChainedBound {
            value: ExtReal::ZERO,
            gamma: 0.0,
            rho: 0.0,
        });
    }
    let nf = n as f64;
    let chaining = |gamma: f64| -> (f64, f64) {
        let m = golden_section_min_log(
            |rho| {
                let integral = adaptive_simpson(|d| log_cover_linf(d).max(0.0).sqrt(), rho, gamma, QUAD_TOL);
                ExtReal::Finite(4.0 * rho * nf + 12.0 * nf.sqrt() * integral)
            },
            gamma.ln() - 30.0,
            gamma.ln(),
            SEARCH_TOL,
        );
        (m.value.to_f64(), m.arg)
    };
    let total = |gamma: f64| -> ExtReal {
        let (chain, _) = chaining(gamma);
        let head = lambda_search(log_cover_linf(gamma / 2.0).max(0.0), n, c, gamma_star);
        ExtReal::Finite(c * chain) + head
    };
    let m = golden_section_min_log(total, log_gamma_range.0, log_gamma_range.1, SEARCH_TOL);
    Ok(ChainedBound {
        value: m.value,
        gamma: m.arg,
        rho: chaining(m.arg).1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChainedBound {
    pub value: ExtReal,
    pub gamma: f64,
    pub rho: f64,
}

/// `s log(eM/s) + s log(1/β)`, the log of `(eM/s)^s β^{−s}`.
pub fn sparse_cover_bound(m: usize, s: usize, beta: f64) -> Result<f64> {
    if s == 0 || s > m {
        return Err(Error::InvalidArgument(format!("sparsity {s} must lie in 1..={m}")));
    }
    if !(beta > 0.0) {
        return Err(Error::Domain {
            what: "cover scale",
            value: beta,
            interval: "(0, inf)".into(),
        });
    }
    let (m, s) = (m as f64, s as f64);
    Ok(s * (std::f64::consts::E * m / s).ln() + s * (1.0 / beta).ln())
}

/// `s log(M/s) / n`.
pub fn sparse_rate(m: usize, s: usize, n: usize) -> Result<f64> {
    if s == 0 || s > m || n == 0 {
        return Err(Error::InvalidArgument(format!("need 1 <= s <= M and n >= 1, got s={s}, M={m}, n={n}")));
    }
    Ok(s as f64 * (m as f64 / s as f64).ln() / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{gamma_star_power, LossModel};

    fn square_gamma() -> impl Fn(f64) -> Result<ExtReal> {
        let sq = LossModel::square(1.0);
        move |s| sq.gamma_star(s)
    }

    #[test]
    fn square_loss_finite_bound() {
        let g = square_gamma();
        for c in [0.5, 1.0, 2.0] {
            for w in [2usize, 4, 16] {
                let v = finite_class_offset_bound(w, 7, c, &g).unwrap().to_f64();
                let want = 2.0 * c * c * (w as f64).ln();
                assert!((v - want).abs() < 1e-6, "C={c} |W|={w}: {v} vs {want}");
            }
        }
        assert!(finite_class_offset_bound(1, 5, 1.0, &g).unwrap().to_f64().abs() < 1e-9);
        assert!(finite_class_offset_bound(0, 5, 1.0, &g).is_err());
    }

    #[test]
    fn quartic_bound_matches_dense_grid() {
        let g = |s: f64| gamma_star_power(1.0, 4.0, s);
        let v = finite_class_offset_bound(4, 2, 1.0, &g).unwrap().to_f64();
        let log4 = 4f64.ln();
        let grid = (0..2_000_001)
            .map(|i| 1e-3 + i as f64 * 5e-6)
            .map(|l| log4 / l + 2.0 * l * l)
            .fold(f64::INFINITY, f64::min);
        assert!((v - grid).abs() < 1e-6, "{v} vs {grid}");
    }

    #[test]
    fn infinite_everywhere_is_infinite() {
        let g = |_s: f64| Ok(ExtReal::PosInfinity);
        assert_eq!(finite_class_offset_bound(3, 1, 1.0, &g).unwrap(), ExtReal::PosInfinity);
    }

    #[test]
    fn linear_bound_examples() {
        let one = LabeledTree::constant(4, 1.0);
        assert_eq!(finite_class_linear_bound(&[one.clone()], 1.0).unwrap(), 0.0);
        let v = finite_class_linear_bound(&[one, LabeledTree::constant(4, -1.0)], 1.0).unwrap();
        assert!((v - (2.0 * 2f64.ln() * 4.0).sqrt()).abs() < 1e-12);
        let zeros = vec![LabeledTree::constant(3, 0.0); 5];
        assert_eq!(finite_class_linear_bound(&zeros, 2.0).unwrap(), 0.0);
        assert!(matches!(finite_class_linear_bound(&[], 1.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn dudley_examples() {
        assert_eq!(dudley_bound(&|_| 0.0, 10, 0.1, 1.0).unwrap(), 4.0);
        let v = dudley_bound(&|d| 1.0 / d, 100, 0.01, 1.0).unwrap();
        assert!((v - 220.0).abs() < 1e-5, "{v}");
        assert_eq!(dudley_bound(&|d| 1.0 / d, 7, 0.5, 0.5).unwrap(), 14.0);
        assert!(dudley_bound(&|_| 0.0, 1, 0.0, 1.0).is_err());
    }

    #[test]
    fn dudley_steps_pick_best_rho() {
        let (v, rho) = dudley_bound_steps(&[0.25, 0.5, 1.0], &[2f64.ln(), 0.0, 0.0], 4, 1.0).unwrap();
        // ρ = 0.25 gives 4 + 24·0.25·√log2 ≈ 8.995; ρ = 0.5 gives 8
        assert_eq!(rho, 0.5);
        assert!((v - 8.0).abs() < 1e-12);
    }

    #[test]
    fn chained_bound_examples() {
        let g = square_gamma();
        assert_eq!(chained_offset_bound(&|_| 1.0, 0, 1.0, &g, (-10.0, 1.0)).unwrap().value, ExtReal::ZERO);
        let zero = chained_offset_bound(&|_| 0.0, 50, 1.0, &g, (-20.0, 1.0)).unwrap();
        assert!(zero.value.to_f64() < 1e-6);
    }

    #[test]
    fn chained_bound_near_dense_grid() {
        let g = square_gamma();
        let (n, c) = (100usize, 1.0);
        let lc = |d: f64| 1.0 / d;
        let got = chained_offset_bound(&lc, n, c, &g, (-8.0, 2.0)).unwrap().value.to_f64();
        // 3-D grid: λ = 1/(2C²) is optimal for the square conjugate, the
        // integral has the closed form 2(√γ − √ρ)
        let nf = n as f64;
        let mut grid = f64::INFINITY;
        for i in 0..=400 {
            let gamma = (-8.0 + 10.0 * i as f64 / 400.0).exp();
            for j in 0..=400 {
                let rho = gamma * (-12.0 * j as f64 / 400.0).exp();
                let chain = 4.0 * rho * nf + 12.0 * nf.sqrt() * 2.0 * (gamma.sqrt() - rho.sqrt());
                for k in 0..=60 {
                    let lambda = (-6.0 + 6.0 * k as f64 / 60.0).exp() / (2.0 * c * c);
                    let head = lc(gamma / 2.0) / lambda;
                    grid = grid.min(c * chain + head);
                }
            }
        }
        assert!((got / grid - 1.0).abs() <= 0.05, "{got} vs {grid}");
    }

    #[test]
    fn sparse_examples() {
        assert!((sparse_cover_bound(5, 5, 1.0).unwrap() - 5.0).abs() < 1e-12);
        // 2 log(4e) + 2 log 2
        let want = 2.0 * (4.0 * std::f64::consts::E).ln() + 2.0 * 2f64.ln();
        assert!((sparse_cover_bound(8, 2, 0.5).unwrap() - want).abs() < 1e-12);
        assert!((sparse_cover_bound(1, 1, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((sparse_rate(8, 2, 4).unwrap() - 2.0 * 4f64.ln() / 4.0).abs() < 1e-12);
        assert!(sparse_cover_bound(2, 3, 1.0).is_err());
    }

    #[test]
    fn offset_expectation_agrees_with_path_sweep() {
        let trees = vec![
            LabeledTree::from_flat(2, &[1.0, -0.5, 0.5]).unwrap(),
            LabeledTree::from_flat(2, &[-1.0, 0.25, 0.0]).unwrap(),
        ];
        let a = finite_class_offset_expectation(&trees, 0.7, &|d| d * d).unwrap();
        let b = super::super::rademacher::tree_offset_rademacher(&trees, None, 0.7, &|d| d * d).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
