//! CART-style classification trees over binary features.
//!
//! Every split tests one feature for presence. Trees grow until a node is
//! pure or no candidate lowers the impurity.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cohort::Label;
use crate::matrix::{DesignMatrix, SparseVector};
use crate::model::ModelError;

/// Impurity decreases at or below this are treated as no improvement; it
/// absorbs rounding in splits whose children share the parent's class mix.
pub const MIN_DECREASE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
    Entropy,
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Criterion::Gini => "gini",
            Criterion::Entropy => "entropy",
        })
    }
}

/// Class counts at a node, `[negative, positive]`.
pub type Counts = [usize; 2];

/// Two-class impurity: Gini 1 − Σp², or entropy −Σ p log2 p with 0·log 0 = 0.
pub fn impurity(counts: Counts, criterion: Criterion) -> Result<f64, ModelError> {
    let total = counts[0] + counts[1];
    if total == 0 {
        return Err(ModelError::EmptyCounts);
    }
    let n = total as f64;
    let p = counts.map(|c| c as f64 / n);
    Ok(match criterion {
        Criterion::Gini => 1.0 - p.iter().map(|q| q * q).sum::<f64>(),
        Criterion::Entropy => p.iter().filter(|&&q| q > 0.0).fold(0.0, |h, q| h - q * q.log2()),
    })
}

/// Weighted impurity decrease of splitting `parent` into the rows where the
/// feature is present (`present`) and the rest.
pub fn split_decrease(parent: Counts, present: Counts, criterion: Criterion) -> f64 {
    let absent = [parent[0] - present[0], parent[1] - present[1]];
    let n = (parent[0] + parent[1]) as f64;
    let child = |c: Counts| {
        let m = c[0] + c[1];
        if m == 0 {
            0.0
        } else {
            m as f64 / n * impurity(c, criterion).expect("nonempty")
        }
    };
    impurity(parent, criterion).expect("nonempty parent") - (child(absent) + child(present))
}

fn counts_of(matrix: &DesignMatrix, rows: &[usize]) -> Counts {
    let mut c = [0, 0];
    for &i in rows {
        c[usize::from(matrix.label(i).is_positive())] += 1;
    }
    c
}

/// Best presence split among `candidates` for the given rows: the largest
/// impurity decrease, ties to the lowest column id. `None` if nothing beats
/// [`MIN_DECREASE`].
pub fn best_split(
    matrix: &DesignMatrix,
    rows: &[usize],
    candidates: &[u32],
    criterion: Criterion,
) -> Option<(u32, f64)> {
    if rows.is_empty() {
        return None;
    }
    let parent = counts_of(matrix, rows);
    let mut present = vec![[0usize; 2]; matrix.dimension()];
    for &i in rows {
        let cls = usize::from(matrix.label(i).is_positive());
        for &c in matrix.row(i).active() {
            present[c as usize][cls] += 1;
        }
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut best: Option<(u32, f64)> = None;
    for &f in &sorted {
        let gain = split_decrease(parent, present[f as usize], criterion);
        if gain > MIN_DECREASE && best.is_none_or(|(_, g)| gain > g) {
            best = Some((f, gain));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeNode {
    Leaf {
        label: Label,
        class_counts: Counts,
    },
    Decision {
        feature: u32,
        absent: Box<TreeNode>,
        present: Box<TreeNode>,
    },
}

impl TreeNode {
    fn leaf(counts: Counts) -> Self {
        TreeNode::Leaf {
            label: if counts[1] > counts[0] { Label::Positive } else { Label::Negative },
            class_counts: counts,
        }
    }

    pub fn predict(&self, x: &SparseVector) -> Label {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { label, .. } => return *label,
                TreeNode::Decision { feature, absent, present } => {
                    node = if x.contains(*feature) { present } else { absent };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Decision { absent, present, .. } => 1 + absent.depth().max(present.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Decision { absent, present, .. } => absent.n_leaves() + present.n_leaves(),
        }
    }

    /// Features tested on each root-to-leaf path.
    pub fn paths(&self) -> Vec<Vec<u32>> {
        match self {
            TreeNode::Leaf { .. } => vec![vec![]],
            TreeNode::Decision { feature, absent, present } => absent
                .paths()
                .into_iter()
                .chain(present.paths())
                .map(|mut p| {
                    p.insert(0, *feature);
                    p
                })
                .collect(),
        }
    }
}

/// Grows a tree on the given rows (duplicates allowed, as in a bootstrap
/// sample). With `feature_subsample`, each split considers that many columns
/// drawn without replacement from `rng`.
pub fn fit_tree_on_rows<R: Rng + ?Sized>(
    matrix: &DesignMatrix,
    rows: Vec<usize>,
    criterion: Criterion,
    feature_subsample: Option<usize>,
    rng: &mut R,
) -> Result<TreeNode, ModelError> {
    if rows.is_empty() {
        return Err(ModelError::EmptyMatrix);
    }
    let all: Vec<u32> = (0..matrix.dimension() as u32).collect();
    Ok(grow(matrix, rows, criterion, feature_subsample, &all, rng))
}

fn grow<R: Rng + ?Sized>(
    matrix: &DesignMatrix,
    rows: Vec<usize>,
    criterion: Criterion,
    feature_subsample: Option<usize>,
    all: &[u32],
    rng: &mut R,
) -> TreeNode {
    let counts = counts_of(matrix, &rows);
    if counts[0] == 0 || counts[1] == 0 {
        return TreeNode::leaf(counts);
    }
    let d = all.len();
    let sampled;
    let candidates: &[u32] = match feature_subsample {
        Some(m) if m < d => {
            let mut pick: Vec<u32> = rand::seq::index::sample(rng, d, m).into_iter().map(|i| i as u32).collect();
            pick.sort_unstable();
            sampled = pick;
            &sampled
        }
        _ => all,
    };
    match best_split(matrix, &rows, candidates, criterion) {
        None => TreeNode::leaf(counts),
        Some((feature, _)) => {
            let (present, absent): (Vec<usize>, Vec<usize>) =
                rows.into_iter().partition(|&i| matrix.row(i).contains(feature));
            let absent = grow(matrix, absent, criterion, feature_subsample, all, rng);
            let present = grow(matrix, present, criterion, feature_subsample, all, rng);
            TreeNode::Decision { feature, absent: Box::new(absent), present: Box::new(present) }
        }
    }
}

/// Single tree on all rows of `matrix`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub root: TreeNode,
    pub criterion: Criterion,
    pub dimension: usize,
}

pub fn fit_tree<R: Rng + ?Sized>(
    matrix: &DesignMatrix,
    criterion: Criterion,
    feature_subsample: Option<usize>,
    rng: &mut R,
) -> Result<TreeModel, ModelError> {
    let root = fit_tree_on_rows(matrix, (0..matrix.n_rows()).collect(), criterion, feature_subsample, rng)?;
    Ok(TreeModel { root, criterion, dimension: matrix.dimension() })
}

impl TreeModel {
    pub fn predict(&self, x: &SparseVector) -> Result<Label, ModelError> {
        if x.dimension() != self.dimension {
            return Err(ModelError::DimensionMismatch { expected: self.dimension, found: x.dimension() });
        }
        Ok(self.root.predict(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use Label::{Negative as N, Positive as P};

    #[test]
    fn impurity_values() {
        assert_eq!(impurity([1, 1], Criterion::Gini).unwrap(), 0.5);
        assert_eq!(impurity([5, 0], Criterion::Entropy).unwrap(), 0.0);
        assert_eq!(impurity([0, 5], Criterion::Gini).unwrap(), 0.0);
        let h = impurity([3, 1], Criterion::Entropy).unwrap();
        let direct = -(0.75f64 * 0.75f64.log2() + 0.25 * 0.25f64.log2());
        assert!((h - direct).abs() < 1e-15);
        assert!((h - 0.8112781245).abs() < 1e-9);
        assert_eq!(impurity([0, 0], Criterion::Gini), Err(ModelError::EmptyCounts));
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn perfect_feature_found_among_noise() {
        let labels = vec![P, N, P, N, N, P, N, N];
        let rows: Vec<Vec<u8>> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| vec![(i % 2) as u8, u8::from(l.is_positive()), (i / 3 % 2) as u8])
            .collect();
        let m = DesignMatrix::from_dense(&rows, labels).unwrap();
        let all: Vec<usize> = (0..8).collect();
        let (f, gain) = best_split(&m, &all, &[0, 1, 2], Criterion::Gini).unwrap();
        assert_eq!(f, 1);
        assert!((gain - impurity([5, 3], Criterion::Gini).unwrap()).abs() < 1e-15);

        let tree = fit_tree(&m, Criterion::Gini, None, &mut rng()).unwrap();
        assert_eq!(tree.root.depth(), 1);
        for i in 0..8 {
            assert_eq!(tree.predict(m.row(i)).unwrap(), m.label(i));
        }
    }

    #[test]
    fn constant_features_give_no_split() {
        let m = DesignMatrix::from_dense(&[vec![1, 0], vec![1, 0], vec![1, 0]], vec![P, N, N]).unwrap();
        assert_eq!(best_split(&m, &[0, 1, 2], &[0, 1], Criterion::Entropy), None);
        let tree = fit_tree(&m, Criterion::Entropy, None, &mut rng()).unwrap();
        assert_eq!(tree.root, TreeNode::Leaf { label: N, class_counts: [2, 1] });
    }

    #[test]
    fn tie_goes_to_lowest_column() {
        let labels = vec![P, N, P, N];
        let rows: Vec<Vec<u8>> = labels
            .iter()
            .map(|l| {
                let mut r = vec![0u8; 10];
                r[3] = u8::from(l.is_positive());
                r[8] = u8::from(l.is_positive());
                r
            })
            .collect();
        let m = DesignMatrix::from_dense(&rows, labels).unwrap();
        assert_eq!(best_split(&m, &[0, 1, 2, 3], &[8, 3], Criterion::Gini).unwrap().0, 3);
    }

    #[test]
    fn single_class_is_a_leaf() {
        let m = DesignMatrix::from_dense(&[vec![1], vec![0]], vec![P, P]).unwrap();
        let t = fit_tree(&m, Criterion::Gini, None, &mut rng()).unwrap();
        assert_eq!(t.root, TreeNode::Leaf { label: P, class_counts: [0, 2] });
        let empty = DesignMatrix::new(1, vec![], vec![]).unwrap();
        assert_eq!(fit_tree(&empty, Criterion::Gini, None, &mut rng()), Err(ModelError::EmptyMatrix));
    }

    fn random_matrix(seed: u64, n: usize, d: usize) -> DesignMatrix {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<u8>> = (0..n).map(|_| (0..d).map(|_| u8::from(r.gen_bool(0.4))).collect()).collect();
        let labels = (0..n).map(|_| if r.gen_bool(0.4) { P } else { N }).collect();
        DesignMatrix::from_dense(&rows, labels).unwrap()
    }

    #[test]
    fn subsampled_fit_is_seed_deterministic() {
        let m = random_matrix(3, 40, 12);
        let a = fit_tree(&m, Criterion::Entropy, Some(3), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = fit_tree(&m, Criterion::Entropy, Some(3), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn impurity_bounds(a in 0usize..50, b in 0usize..50) {
            prop_assume!(a + b > 0);
            let g = impurity([a, b], Criterion::Gini).unwrap();
            let h = impurity([a, b], Criterion::Entropy).unwrap();
            prop_assert!((0.0..=0.5).contains(&g));
            prop_assert!((0.0..=1.0 + 1e-15).contains(&h));
            let pure = a == 0 || b == 0;
            prop_assert_eq!(g == 0.0, pure);
            prop_assert_eq!(h == 0.0, pure);
        }

        #[test]
        fn grown_tree_is_consistent(seed in 0u64..500) {
            let m = random_matrix(seed, 30, 8);
            let t = fit_tree(&m, Criterion::Gini, None, &mut rng()).unwrap();
            for path in t.root.paths() {
                let mut p = path.clone();
                p.sort_unstable();
                p.dedup();
                prop_assert_eq!(p.len(), path.len());
            }
            // leaf counts add up to the rows routed there
            fn check(node: &TreeNode, m: &DesignMatrix, rows: &[usize]) -> bool {
                match node {
                    TreeNode::Leaf { class_counts, .. } => *class_counts == counts_of(m, rows),
                    TreeNode::Decision { feature, absent, present } => {
                        let (p, a): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| m.row(i).contains(*feature));
                        check(absent, m, &a) && check(present, m, &p)
                    }
                }
            }
            prop_assert!(check(&t.root, &m, &(0..30).collect::<Vec<_>>()));
        }
    }
}
