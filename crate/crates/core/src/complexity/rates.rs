//! Rate calculators for entropy growth `log 𝒩 ∼ β^{−p}` and curvature
//! `Δ(t) ≥ K t^r`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One term `coef · n^{exponent} · (log n)^{log_power}` of a rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBranch {
    pub coef: f64,
    pub exponent: f64,
    pub log_power: f64,
}

impl RateBranch {
    pub fn eval(&self, n: f64) -> f64 {
        if self.coef == 0.0 {
            return 0.0;
        }
        self.coef * n.powf(self.exponent) * n.ln().powf(self.log_power)
    }
}

/// A per-round rate `(1/n) V_n` given as the minimum of its branches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBound {
    pub value: f64,
    /// Exponent of `n` in the branch that wins as `n → ∞`.
    pub exponent: f64,
    pub branches: Vec<RateBranch>,
}

impl RateBound {
    fn from_branches(branches: Vec<RateBranch>, n: usize) -> Self {
        let nf = n as f64;
        let value = branches.iter().map(|b| b.eval(nf)).fold(f64::INFINITY, f64::min);
        let exponent = branches
            .iter()
            .filter(|b| b.coef.is_finite())
            .map(|b| b.exponent)
            .fold(f64::INFINITY, f64::min);
        RateBound {
            value,
            exponent,
            branches,
        }
    }

    /// Power part `coef · n^{exponent}` of the asymptotically winning
    /// branch, logarithmic factor removed.
    pub fn asymptotic_power(&self, n: usize) -> f64 {
        self.branches
            .iter()
            .filter(|b| b.coef.is_finite() && b.exponent == self.exponent)
            .map(|b| b.coef * (n as f64).powf(b.exponent))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Multiplicative constants left unspecified by the rate theorems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConstants {
    pub c: f64,
    pub c_class: f64,
}

impl Default for RateConstants {
    fn default() -> Self {
        RateConstants { c: 1.0, c_class: 1.0 }
    }
}

fn check(p: f64, r: f64, n: usize) -> Result<()> {
    if !(p > 0.0) {
        return Err(Error::Domain {
            what: "entropy exponent p",
            value: p,
            interval: "(0, inf)".into(),
        });
    }
    if !(r >= 2.0) {
        return Err(Error::Domain {
            what: "curvature power r",
            value: r,
            interval: "[2, inf)".into(),
        });
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("rates need n >= 2, got {n}")));
    }
    Ok(())
}

/// The curvature-driven branch `coef · n^{−r/(2(r−1)+p)}` with
/// `coef = c · A^{2r/(2(r−1)+p)} · K^{−(2−p)/(2(r−1)+p)}`.
fn curvature_branch(p: f64, r: f64, a: f64, k: f64, c: f64, log_power: f64) -> RateBranch {
    let denom = 2.0 * (r - 1.0) + p;
    let coef = if a == 0.0 {
        0.0
    } else {
        c * a.powf(2.0 * r / denom) * k.powf(-(2.0 - p) / denom)
    };
    RateBranch {
        coef,
        exponent: -r / denom,
        log_power,
    }
}

/// Upper bound on `(1/n) V_n`.
///
/// `p < 2`: min of the curvature branch (one `log n`) and `c_ℱ G √log n / √n`;
/// `p > 2`: `c G √log n n^{−1/p}`; `p = 2`: both, the second with an extra
/// `log n`.
pub fn rate_upper(p: f64, r: f64, g: f64, k: f64, n: usize, consts: RateConstants) -> Result<RateBound> {
    check(p, r, n)?;
    let branches = if p < 2.0 {
        vec![
            curvature_branch(p, r, g, k, consts.c, 1.0),
            RateBranch {
                coef: consts.c_class * g,
                exponent: -0.5,
                log_power: 0.5,
            },
        ]
    } else if p == 2.0 {
        vec![
            curvature_branch(p, r, g, k, consts.c, 1.0),
            RateBranch {
                coef: consts.c * g,
                exponent: -0.5,
                log_power: 1.5,
            },
        ]
    } else {
        vec![RateBranch {
            coef: consts.c * g,
            exponent: -1.0 / p,
            log_power: 0.5,
        }]
    };
    Ok(RateBound::from_branches(branches, n))
}

/// Lower bound on `(1/n) V_n`.
///
/// `p ≤ 2`: `c · min{curvature branch with R, R n^{−1/2}}`; `p > 2`:
/// `(R/2) n^{−1/p}`.
pub fn rate_lower(p: f64, r: f64, big_r: f64, k: f64, n: usize, c: f64) -> Result<RateBound> {
    check(p, r, n)?;
    let branches = if p <= 2.0 {
        vec![
            curvature_branch(p, r, big_r, k, c, 0.0),
            RateBranch {
                coef: c * big_r,
                exponent: -0.5,
                log_power: 0.0,
            },
        ]
    } else {
        vec![RateBranch {
            coef: big_r / 2.0,
            exponent: -1.0 / p,
            log_power: 0.0,
        }]
    };
    Ok(RateBound::from_branches(branches, n))
}
