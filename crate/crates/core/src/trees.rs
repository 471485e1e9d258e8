//! Complete binary trees indexed by sign paths.
//!
//! Level `t` (1-based) stores `2^{t−1}` labels; the label reached by a path
//! `ε` sits at the integer whose binary digits are `ε_1 … ε_{t−1}` with
//! `−1 → 0` and `+1 → 1`, most significant first.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest depth for which [`all_paths`] enumerates without an override.
pub const PATH_GUARD: usize = 25;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignPath(Vec<i8>);

impl SignPath {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument("signs must be ±1".into()));
        }
        Ok(SignPath(signs))
    }

    /// The `index`-th path of length `n` in lexicographic order.
    pub fn from_index(index: u64, n: usize) -> Self {
        SignPath(
            (0..n)
                .map(|j| if (index >> (n - 1 - j)) & 1 == 1 { 1 } else { -1 })
                .collect(),
        )
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Node index at level `t`, i.e. the encoding of `ε_{1:t−1}`.
    pub fn node_index(&self, t: usize) -> usize {
        self.0[..t - 1]
            .iter()
            .fold(0usize, |acc, &s| (acc << 1) | usize::from(s == 1))
    }
}

/// Yields all `2^n` sign paths in lexicographic order.
pub fn all_paths(n: usize) -> Result<impl Iterator<Item = SignPath>> {
    if n > PATH_GUARD {
        return Err(Error::Resource {
            what: "sign path enumeration",
            required: 2f64.powi(n as i32),
            limit: 2f64.powi(PATH_GUARD as i32),
        });
    }
    Ok(all_paths_unguarded(n))
}

pub fn all_paths_unguarded(n: usize) -> impl Iterator<Item = SignPath> {
    assert!(n < 64, "path index overflows u64");
    (0..(1u64 << n)).map(move |i| SignPath::from_index(i, n))
}

/// Node index at level `t` of the path with lexicographic index `path` in a
/// depth-`n` tree.
#[inline]
pub fn node_of(path: u64, n: usize, t: usize) -> usize {
    (path >> (n + 1 - t)) as usize
}

/// Sign `ε_t ∈ {−1, +1}` of the path with lexicographic index `path`.
#[inline]
pub fn sign_of(path: u64, n: usize, t: usize) -> f64 {
    if (path >> (n - t)) & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledTree<T> {
    depth: usize,
    levels: Vec<Vec<T>>,
}

impl<T: Clone> LabeledTree<T> {
    pub fn new(levels: Vec<Vec<T>>) -> Result<Self> {
        for (i, level) in levels.iter().enumerate() {
            if level.len() != 1 << i {
                return Err(Error::Shape(format!(
                    "level {} has {} labels, expected {}",
                    i + 1,
                    level.len(),
                    1usize << i
                )));
            }
        }
        Ok(LabeledTree {
            depth: levels.len(),
            levels,
        })
    }

    pub fn constant(depth: usize, label: T) -> Self {
        LabeledTree {
            depth,
            levels: (0..depth).map(|i| vec![label.clone(); 1 << i]).collect(),
        }
    }

    /// Builds a tree from a function of `(t, node index)`.
    pub fn from_fn(depth: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        LabeledTree {
            depth,
            levels: (1..=depth)
                .map(|t| (0..1usize << (t - 1)).map(|i| f(t, i)).collect())
                .collect(),
        }
    }

    /// Builds a tree from a flat heap-ordered label list of length `2^n − 1`.
    pub fn from_flat(depth: usize, flat: &[T]) -> Result<Self> {
        if flat.len() + 1 != 1 << depth {
            return Err(Error::Shape(format!(
                "{} labels cannot fill a depth-{depth} tree",
                flat.len()
            )));
        }
        Ok(Self::from_fn(depth, |t, i| flat[(1 << (t - 1)) - 1 + i].clone()))
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn levels(&self) -> &[Vec<T>] {
        &self.levels
    }

    pub fn label_at(&self, t: usize, path: &SignPath) -> Result<&T> {
        if t == 0 || t > self.depth {
            return Err(Error::Index {
                index: t,
                max: self.depth,
            });
        }
        if path.len() + 1 < t {
            return Err(Error::Shape(format!(
                "path of length {} too short for level {t}",
                path.len()
            )));
        }
        Ok(&self.levels[t - 1][path.node_index(t)])
    }

    /// Label at level `t`, node `index` (encoding of the first `t−1` signs).
    #[inline]
    pub fn node(&self, t: usize, index: usize) -> &T {
        &self.levels[t - 1][index]
    }

    pub fn map<U: Clone>(&self, mut f: impl FnMut(&T) -> U) -> LabeledTree<U> {
        LabeledTree {
            depth: self.depth,
            levels: self
                .levels
                .iter()
                .map(|level| level.iter().map(&mut f).collect())
                .collect(),
        }
    }

    /// Applies a fallible predictor node-wise.
    pub fn compose<U: Clone>(&self, mut f: impl FnMut(&T) -> Result<U>) -> Result<LabeledTree<U>> {
        let levels = self
            .levels
            .iter()
            .map(|level| level.iter().map(&mut f).collect::<Result<Vec<U>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(LabeledTree {
            depth: self.depth,
            levels,
        })
    }

    pub fn node_count(&self) -> usize {
        (1 << self.depth) - 1
    }
}

/// Enumerates every tree of depth `n` whose labels come from `0..k`
/// (`k^{2^n−1}` trees), as flat heap-ordered label vectors.
pub fn all_label_assignments(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let nodes = (1usize << n) - 1;
    let mut current = vec![0usize; nodes];
    let mut done = k == 0 && nodes > 0;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let out = current.clone();
        // odometer increment
        let mut i = 0;
        loop {
            if i == nodes {
                done = true;
                break;
            }
            current[i] += 1;
            if current[i] < k {
                break;
            }
            current[i] = 0;
            i += 1;
        }
        Some(out)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_is_constant() {
        let t = LabeledTree::new(vec![vec![7]]).unwrap();
        for p in all_paths(1).unwrap() {
            assert_eq!(*t.label_at(1, &p).unwrap(), 7);
        }
    }

    #[test]
    fn right_child_convention() {
        let t = LabeledTree::new(vec![vec!['r'], vec!['a', 'b']]).unwrap();
        let p = SignPath::new(vec![1, -1]).unwrap();
        assert_eq!(*t.label_at(2, &p).unwrap(), 'b');
        let p = SignPath::new(vec![-1, 1]).unwrap();
        assert_eq!(*t.label_at(2, &p).unwrap(), 'a');
    }

    #[test]
    fn constant_tree_everywhere() {
        let t = LabeledTree::constant(4, 2.5);
        for p in all_paths(4).unwrap() {
            for s in 1..=4 {
                assert_eq!(*t.label_at(s, &p).unwrap(), 2.5);
            }
        }
    }

    #[test]
    fn label_out_of_range() {
        let t = LabeledTree::constant(2, 0);
        let p = SignPath::new(vec![1, 1]).unwrap();
        assert!(matches!(t.label_at(3, &p), Err(Error::Index { index: 3, max: 2 })));
        assert!(t.label_at(0, &p).is_err());
    }

    #[test]
    fn path_enumeration() {
        let p1: Vec<_> = all_paths(1).unwrap().map(|p| p.signs().to_vec()).collect();
        assert_eq!(p1, vec![vec![-1], vec![1]]);
        let p2: Vec<_> = all_paths(2).unwrap().map(|p| p.signs().to_vec()).collect();
        assert_eq!(p2, vec![vec![-1, -1], vec![-1, 1], vec![1, -1], vec![1, 1]]);
        let p0: Vec<_> = all_paths(0).unwrap().collect();
        assert_eq!(p0.len(), 1);
        assert!(p0[0].is_empty());
        assert!(matches!(all_paths(26), Err(Error::Resource { .. })));
    }

    #[test]
    fn bit_helpers_agree_with_sign_paths() {
        let n = 5;
        for (i, p) in all_paths(n).unwrap().enumerate() {
            for t in 1..=n {
                assert_eq!(node_of(i as u64, n, t), p.node_index(t));
                assert_eq!(sign_of(i as u64, n, t), p.signs()[t - 1] as f64);
            }
        }
    }

    #[test]
    fn predictability_exhaustive() {
        // labels depend only on the prefix: paths sharing ε_{1:t−1} agree at t
        for n in 0..=10 {
            let tree = LabeledTree::from_fn(n, |t, i| (t * 1000 + i) as u64);
            let paths: Vec<_> = all_paths(n).unwrap().collect();
            for t in 1..=n {
                let stride = 1usize << (n - t + 1);
                for block in paths.chunks(stride) {
                    let first = tree.label_at(t, &block[0]).unwrap();
                    assert!(block.iter().all(|p| tree.label_at(t, p).unwrap() == first));
                }
            }
        }
    }

    #[test]
    fn shape_is_validated() {
        assert!(LabeledTree::new(vec![vec![1], vec![2]]).is_err());
        assert!(LabeledTree::from_flat(2, &[1, 2]).is_err());
        let t = LabeledTree::from_flat(2, &[1, 2, 3]).unwrap();
        assert_eq!(t.levels(), &[vec![1], vec![2, 3]]);
    }

    #[test]
    fn compose_commutes_with_label_at() {
        let table = [[1.0, -1.0, 0.5], [0.0, 0.25, -0.75]];
        let covariates = LabeledTree::from_flat(2, &[0usize, 2, 1]).unwrap();
        for row in &table {
            let composed = covariates.compose(|&x| Ok(row[x])).unwrap();
            for p in all_paths(2).unwrap() {
                for t in 1..=2 {
                    let x = *covariates.label_at(t, &p).unwrap();
                    assert_eq!(*composed.label_at(t, &p).unwrap(), row[x]);
                }
            }
        }
        let id = LabeledTree::from_flat(2, &[0.5, -0.5, 1.0]).unwrap();
        assert_eq!(id.compose(|&v| Ok(v)).unwrap(), id);
        assert_eq!(id.map(|_| 3.0), LabeledTree::constant(2, 3.0));
    }

    #[test]
    fn label_assignment_count() {
        assert_eq!(all_label_assignments(2, 3).count(), 27);
        assert_eq!(all_label_assignments(0, 3).count(), 1);
        assert_eq!(all_label_assignments(1, 1).count(), 1);
    }
}
