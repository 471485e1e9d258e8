//! Sequential fat-shattering dimension of finite classes.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::comparators::FiniteTable;
use crate::trees::LabeledTree;
use crate::{Error, Result};

/// Largest class handled (predictor subsets are `u64` bitmasks).
pub const CLASS_GUARD: usize = 64;

/// Limit on memoized `(subset, depth)` states.
pub const STATE_GUARD: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShatterCertificate {
    pub depth: usize,
    pub beta: f64,
    pub covariate_tree: LabeledTree<usize>,
    pub witness: LabeledTree<f64>,
    /// `selectors[path]`: predictor realizing the sign pattern `path`.
    pub selectors: Vec<usize>,
}

impl ShatterCertificate {
    /// Checks `ε_t (f^ε(x_t(ε)) − s_t(ε)) ≥ β/2` for every path and level.
    pub fn validate(&self, table: &FiniteTable) -> bool {
        let d = self.depth;
        self.selectors.len() == 1 << d
            && self.selectors.iter().enumerate().all(|(p, &f)| {
                (1..=d).all(|t| {
                    let node = crate::trees::node_of(p as u64, d, t);
                    let eps = crate::trees::sign_of(p as u64, d, t);
                    let v = table.values[f][*self.covariate_tree.node(t, node)];
                    eps * (v - self.witness.node(t, node)) >= self.beta / 2.0 - 1e-12
                })
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FatReport {
    pub dimension: usize,
    pub certificate: Option<ShatterCertificate>,
}

#[derive(Clone, Copy)]
struct Split {
    x: usize,
    witness: f64,
    left: u64,
    right: u64,
}

struct Search<'a> {
    table: &'a FiniteTable,
    /// per covariate: candidate witnesses
    witnesses: Vec<(usize, Vec<f64>)>,
    beta: f64,
    memo: HashMap<(u64, usize), Option<Split>>,
}

impl Search<'_> {
    /// Whether the predictors in `mask` shatter some tree of depth `d`.
    fn shatters(&mut self, mask: u64, d: usize) -> Result<bool> {
        if d == 0 {
            return Ok(mask != 0);
        }
        if mask.count_ones() < 2 {
            return Ok(false);
        }
        if let Some(hit) = self.memo.get(&(mask, d)) {
            return Ok(hit.is_some());
        }
        if self.memo.len() >= STATE_GUARD {
            return Err(Error::Resource {
                what: "shattering search states",
                required: self.memo.len() as f64 + 1.0,
                limit: STATE_GUARD as f64,
            });
        }
        let mut found = None;
        let witnesses = self.witnesses.clone();
        'outer: for (x, cands) in &witnesses {
            let mut tried = Vec::new();
            for &s in cands {
                let (mut left, mut right) = (0u64, 0u64);
                for f in 0..self.table.len() {
                    if mask >> f & 1 == 0 {
                        continue;
                    }
                    let v = self.table.values[f][*x];
                    if v - s >= self.beta / 2.0 - 1e-12 {
                        right |= 1 << f;
                    } else if s - v >= self.beta / 2.0 - 1e-12 {
                        left |= 1 << f;
                    }
                }
                if left == 0 || right == 0 || tried.contains(&(left, right)) {
                    continue;
                }
                tried.push((left, right));
                if self.shatters(left, d - 1)? && self.shatters(right, d - 1)? {
                    found = Some(Split {
                        x: *x,
                        witness: s,
                        left,
                        right,
                    });
                    break 'outer;
                }
            }
        }
        self.memo.insert((mask, d), found);
        Ok(found.is_some())
    }

    fn build(&self, mask: u64, d: usize, t: usize, node: usize, out: &mut Builder) {
        if d == 0 {
            out.selectors[node] = mask.trailing_zeros() as usize;
            return;
        }
        let split = self.memo[&(mask, d)].expect("shattered state has a split");
        out.xs[t - 1][node] = split.x;
        out.ws[t - 1][node] = split.witness;
        self.build(split.left, d - 1, t + 1, 2 * node, out);
        self.build(split.right, d - 1, t + 1, 2 * node + 1, out);
    }
}

struct Builder {
    xs: Vec<Vec<usize>>,
    ws: Vec<Vec<f64>>,
    selectors: Vec<usize>,
}

/// Largest `d ≤ max_depth` such that some `𝒳`-valued tree of depth `d` is
/// `β`-shattered, with a certificate when `d ≥ 1`.
///
/// Witness labels range over midpoints of pairs of achievable values at the
/// node's covariate (which loses nothing at a fixed `β`) plus `extra_grid`.
pub fn fat_shattering(
    table: &FiniteTable,
    covariate_set: &[usize],
    beta: f64,
    max_depth: usize,
    extra_grid: &[f64],
) -> Result<FatReport> {
    if !(beta > 0.0) {
        return Err(Error::Domain {
            what: "shattering scale",
            value: beta,
            interval: "(0, inf)".into(),
        });
    }
    if table.len() > CLASS_GUARD {
        return Err(Error::Resource {
            what: "class size for shattering search",
            required: table.len() as f64,
            limit: CLASS_GUARD as f64,
        });
    }
    let mut witnesses = Vec::new();
    for &x in covariate_set {
        if x >= table.covariate_count() {
            return Err(Error::Lookup(format!("covariate {x} of {}", table.covariate_count())));
        }
        let mut vals: Vec<f64> = (0..table.len()).map(|f| table.values[f][x]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        let mut cands: Vec<f64> = Vec::new();
        for (i, a) in vals.iter().enumerate() {
            for b in &vals[i..] {
                cands.push(0.5 * (a + b));
            }
        }
        cands.extend_from_slice(extra_grid);
        cands.sort_by(f64::total_cmp);
        cands.dedup();
        witnesses.push((x, cands));
    }
    let full = if table.len() == 64 { u64::MAX } else { (1u64 << table.len()) - 1 };
    let mut search = Search {
        table,
        witnesses,
        beta,
        memo: HashMap::new(),
    };
    let mut dim = 0;
    while dim < max_depth && search.shatters(full, dim + 1)? {
        dim += 1;
    }
    if dim == 0 {
        return Ok(FatReport {
            dimension: 0,
            certificate: None,
        });
    }
    let mut out = Builder {
        xs: (0..dim).map(|i| vec![0; 1 << i]).collect(),
        ws: (0..dim).map(|i| vec![0.0; 1 << i]).collect(),
        selectors: vec![0; 1 << dim],
    };
    search.build(full, dim, 1, 0, &mut out);
    Ok(FatReport {
        dimension: dim,
        certificate: Some(ShatterCertificate {
            depth: dim,
            beta,
            covariate_tree: LabeledTree::new(out.xs)?,
            witness: LabeledTree::new(out.ws)?,
            selectors: out.selectors,
        }),
    })
}

/// `(2en/β)^fat`, the bound on `𝒩_∞(β, ℱ, n)` for `[−1, 1]`-valued classes.
pub fn cover_fat_bound(beta: f64, n: usize, fat: usize) -> f64 {
    (2.0 * std::f64::consts::E * n as f64 / beta).powi(fat as i32)
}
