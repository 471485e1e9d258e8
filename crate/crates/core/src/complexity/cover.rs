//! Minimal sequential covers over selector-tree candidates.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::comparators::FiniteTable;
use crate::trees::{node_of, LabeledTree};
use crate::{Error, Result};

/// Largest number of candidate trees examined by the exact search.
pub const CANDIDATE_GUARD: f64 = 4e6;

/// Largest `|ℱ| · 2^n` (elements to cover) supported.
pub const UNIVERSE_GUARD: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L2,
    Linf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    pub beta: f64,
    pub norm: Norm,
    pub size: usize,
    pub cover: Vec<LabeledTree<f64>>,
    /// `certificate[f][path]` indexes the tree covering `f` along `path`.
    pub certificate: Vec<Vec<usize>>,
}

impl CoverReport {
    /// Re-checks every certificate entry against the class.
    pub fn validate(&self, table: &FiniteTable, x: &LabeledTree<usize>) -> Result<bool> {
        let n = x.depth();
        for (f, row) in self.certificate.iter().enumerate() {
            for (path, &v) in row.iter().enumerate() {
                let tree = self.cover.get(v).ok_or_else(|| Error::Lookup(format!("cover tree {v}")))?;
                let vals: Vec<f64> = (1..=n).map(|t| *tree.node(t, node_of(path as u64, n, t))).collect();
                if !within(table, x, f, path as u64, &vals, self.beta, self.norm) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

fn within(table: &FiniteTable, x: &LabeledTree<usize>, f: usize, path: u64, v: &[f64], beta: f64, norm: Norm) -> bool {
    let n = x.depth();
    let slack = 1e-12;
    let gaps = (1..=n).map(|t| (table.values[f][*x.node(t, node_of(path, n, t))] - v[t - 1]).abs());
    match norm {
        Norm::Linf => gaps.fold(0.0, f64::max) <= beta + slack,
        Norm::L2 => n == 0 || gaps.map(|g| g * g).sum::<f64>() / n as f64 <= beta * beta + slack,
    }
}

/// Smallest `β`-cover of `ℱ` on `x` among selector trees, i.e. trees whose
/// label at each node is `g(x_t(ε))` for some `g ∈ ℱ`.
///
/// Restricting to selector trees keeps the search finite; it yields a valid
/// cover whose size is at least the unrestricted minimum and at most the
/// unrestricted minimum at scale `β/2`.
pub fn seq_cover_number(table: &FiniteTable, x: &LabeledTree<usize>, beta: f64, norm: Norm) -> Result<CoverReport> {
    if !(beta > 0.0) {
        return Err(Error::Domain {
            what: "cover scale",
            value: beta,
            interval: "(0, inf)".into(),
        });
    }
    let n = x.depth();
    for level in x.levels() {
        for &id in level {
            if id >= table.covariate_count() {
                return Err(Error::Lookup(format!("covariate {id} of {}", table.covariate_count())));
            }
        }
    }
    let paths = 1usize << n;
    let universe = table.len() * paths;
    if universe > UNIVERSE_GUARD {
        return Err(Error::Resource {
            what: "cover universe (predictors x paths)",
            required: universe as f64,
            limit: UNIVERSE_GUARD as f64,
        });
    }
    // distinct achievable values at each node, heap order
    let node_values: Vec<Vec<f64>> = (1..=n)
        .flat_map(|t| (0..1usize << (t - 1)).map(move |i| (t, i)))
        .map(|(t, i)| {
            let id = *x.node(t, i);
            let mut vals: Vec<f64> = (0..table.len()).map(|f| table.values[f][id]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            vals
        })
        .collect();
    let count: f64 = node_values.iter().map(|v| v.len() as f64).product();
    if count > CANDIDATE_GUARD {
        return Err(Error::Resource {
            what: "cover candidate trees",
            required: count,
            limit: CANDIDATE_GUARD,
        });
    }
    let radices: Vec<usize> = node_values.iter().map(Vec::len).collect();
    let decode = |mut code: u64| -> Vec<f64> {
        node_values
            .iter()
            .zip(&radices)
            .map(|(vals, &r)| {
                let v = vals[(code % r as u64) as usize];
                code /= r as u64;
                v
            })
            .collect()
    };
    // per (node, value) acceptance bits for the sup norm, squared gaps for l2;
    // pairs whose path avoids the node are unconstrained there
    let slack = 1e-12;
    let flat_index = |t: usize, i: usize| (1usize << (t - 1)) - 1 + i;
    let on_path: Vec<Vec<usize>> = (0..paths)
        .map(|p| (1..=n).map(|t| flat_index(t, node_of(p as u64, n, t))).collect())
        .collect();
    let mut node_of_flat = vec![(0usize, 0usize); node_values.len()];
    for t in 1..=n {
        for i in 0..1usize << (t - 1) {
            node_of_flat[flat_index(t, i)] = (t, i);
        }
    }
    let ok: Vec<Vec<u128>> = node_values
        .iter()
        .enumerate()
        .map(|(j, vals)| {
            let (t, i) = node_of_flat[j];
            let id = *x.node(t, i);
            vals.iter()
                .map(|&v| {
                    let mut mask = 0u128;
                    for f in 0..table.len() {
                        for p in 0..paths {
                            if node_of(p as u64, n, t) != i || (table.values[f][id] - v).abs() <= beta + slack {
                                mask |= 1u128 << (f * paths + p);
                            }
                        }
                    }
                    mask
                })
                .collect()
        })
        .collect();
    let budget = n as f64 * beta * beta + n as f64 * slack;
    // sq[j][a][f]: squared gap of predictor f at node j against value index a
    let sq: Vec<Vec<Vec<f64>>> = node_values
        .iter()
        .enumerate()
        .map(|(j, vals)| {
            let (t, i) = node_of_flat[j];
            let id = *x.node(t, i);
            vals.iter()
                .map(|&v| (0..table.len()).map(|f| (table.values[f][id] - v).powi(2)).collect())
                .collect()
        })
        .collect();
    let mask_of = |code: u64, digits: &mut Vec<usize>| -> u128 {
        digits.clear();
        let mut c = code;
        for &r in &radices {
            digits.push((c % r as u64) as usize);
            c /= r as u64;
        }
        match norm {
            Norm::Linf => digits.iter().enumerate().fold(u128::MAX, |m, (j, &a)| m & ok[j][a]),
            Norm::L2 if n == 0 => u128::MAX,
            Norm::L2 => {
                let mut mask = 0u128;
                for f in 0..table.len() {
                    for (p, nodes) in on_path.iter().enumerate() {
                        let ss: f64 = nodes.iter().map(|&j| sq[j][digits[j]][f]).sum();
                        if ss <= budget {
                            mask |= 1u128 << (f * paths + p);
                        }
                    }
                }
                mask
            }
        }
    };
    let full = if universe == 128 { u128::MAX } else { (1u128 << universe) - 1 };
    let masks: Vec<(u128, u64)> = {
        let mut digits = Vec::with_capacity(radices.len());
        (0..count as u64).map(|code| (mask_of(code, &mut digits) & full, code)).collect()
    };
    // keep the first code per mask, then drop dominated masks
    let mut seen = HashSet::new();
    let mut unique: Vec<(u128, u64)> = masks.into_iter().filter(|(m, _)| *m != 0 && seen.insert(*m)).collect();
    unique.sort_by_key(|(m, _)| std::cmp::Reverse(m.count_ones()));
    let mut maximal: Vec<(u128, u64)> = Vec::new();
    for (m, code) in unique {
        if !maximal.iter().any(|(big, _)| big & m == m) {
            maximal.push((m, code));
        }
    }
    let sets: Vec<u128> = maximal.iter().map(|(m, _)| *m).collect();
    let chosen = exact_set_cover(&sets, full).ok_or_else(|| Error::Numeric("no cover found".into()))?;

    let cover: Vec<LabeledTree<f64>> = chosen
        .iter()
        .map(|&i| LabeledTree::from_flat(n, &decode(maximal[i].1)))
        .collect::<Result<_>>()?;
    let certificate = (0..table.len())
        .map(|f| {
            (0..paths)
                .map(|p| {
                    chosen
                        .iter()
                        .position(|&i| sets[i] >> (f * paths + p) & 1 == 1)
                        .expect("chosen sets cover the universe")
                })
                .collect()
        })
        .collect();
    Ok(CoverReport {
        beta,
        norm,
        size: cover.len(),
        cover,
        certificate,
    })
}

/// Minimum-cardinality subfamily of `sets` whose union is `full`, by
/// greedy seeding and depth-first branch and bound on the rarest element.
pub fn exact_set_cover(sets: &[u128], full: u128) -> Option<Vec<usize>> {
    if full == 0 {
        return Some(Vec::new());
    }
    let union = sets.iter().fold(0u128, |a, s| a | s);
    if union & full != full {
        return None;
    }
    let mut best = greedy_cover(sets, full);
    let mut current = Vec::new();
    branch(sets, full, 0, &mut current, &mut best);
    Some(best)
}

fn greedy_cover(sets: &[u128], full: u128) -> Vec<usize> {
    let mut covered = 0u128;
    let mut out = Vec::new();
    while covered != full {
        let (i, _) = sets
            .iter()
            .enumerate()
            .map(|(i, s)| (i, (s & !covered & full).count_ones()))
            .max_by_key(|&(i, c)| (c, std::cmp::Reverse(i)))
            .expect("nonempty family");
        covered |= sets[i];
        out.push(i);
    }
    out
}

fn branch(sets: &[u128], full: u128, covered: u128, current: &mut Vec<usize>, best: &mut Vec<usize>) {
    if covered & full == full {
        if current.len() < best.len() {
            *best = current.clone();
        }
        return;
    }
    let uncovered = full & !covered;
    let largest = sets.iter().map(|s| (s & uncovered).count_ones()).max().unwrap_or(0);
    if largest == 0 {
        return;
    }
    let lower = current.len() + (uncovered.count_ones()).div_ceil(largest) as usize;
    if lower >= best.len() {
        return;
    }
    // branch on the element with the fewest covering sets
    let mut rarest = (u32::MAX, 0u32);
    let mut bits = uncovered;
    while bits != 0 {
        let e = bits.trailing_zeros();
        bits &= bits - 1;
        let c = sets.iter().filter(|s| *s >> e & 1 == 1).count() as u32;
        if c < rarest.0 {
            rarest = (c, e);
        }
    }
    let e = rarest.1;
    for (i, s) in sets.iter().enumerate() {
        if s >> e & 1 == 1 {
            current.push(i);
            branch(sets, full, covered | s, current, best);
            current.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm() -> FiniteTable {
        FiniteTable::new(vec![vec![1.0], vec![-1.0]]).unwrap()
    }

    #[test]
    fn examples() {
        let x = LabeledTree::constant(2, 0);
        let big = seq_cover_number(&pm(), &x, 2.0, Norm::Linf).unwrap();
        assert_eq!(big.size, 1);
        let single = FiniteTable::new(vec![vec![0.3]]).unwrap();
        assert_eq!(seq_cover_number(&single, &x, 1e-3, Norm::L2).unwrap().size, 1);
        let r = seq_cover_number(&pm(), &x, 0.5, Norm::Linf).unwrap();
        assert_eq!(r.size, 2);
        assert!(r.validate(&pm(), &x).unwrap());
        assert!(seq_cover_number(&pm(), &x, 0.0, Norm::L2).is_err());
    }

    #[test]
    fn set_cover_is_minimal_on_small_families() {
        // brute force over all subfamilies of 8 random sets
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            state >> 33
        };
        for _ in 0..50 {
            let sets: Vec<u128> = (0..8).map(|_| (next() & 0x3ff) as u128).collect();
            let full = sets.iter().fold(0, |a, s| a | s);
            let got = exact_set_cover(&sets, full).unwrap();
            let best = (0u32..256)
                .filter(|sub| {
                    (0..8).filter(|i| sub >> i & 1 == 1).fold(0, |a, i| a | sets[i]) == full
                })
                .map(u32::count_ones)
                .min()
                .unwrap();
            assert_eq!(got.len() as u32, best);
        }
    }

    #[test]
    fn l2_cover_never_larger_than_linf() {
        let table = FiniteTable::new(vec![vec![1.0, 0.0], vec![-1.0, 1.0], vec![0.0, -1.0]]).unwrap();
        let x = LabeledTree::from_flat(2, &[0, 1, 0]).unwrap();
        for beta in [0.3, 0.6, 0.9, 1.2, 1.6] {
            let l2 = seq_cover_number(&table, &x, beta, Norm::L2).unwrap();
            let linf = seq_cover_number(&table, &x, beta, Norm::Linf).unwrap();
            assert!(l2.size <= linf.size);
            assert!(l2.validate(&table, &x).unwrap() && linf.validate(&table, &x).unwrap());
        }
    }

    #[test]
    fn report_serializes() {
        let r = seq_cover_number(&pm(), &LabeledTree::constant(1, 0), 0.5, Norm::L2).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"norm\":\"l2\""));
        let back: CoverReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
