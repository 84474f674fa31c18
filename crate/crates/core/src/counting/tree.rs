//! CART classification tree with Gini impurity.
//!
//! Candidate thresholds are midpoints between consecutive distinct sorted
//! values. The split with the lowest weighted impurity wins; ties keep the
//! lower feature index, then the lower threshold. Samples with
//! `x[feature] <= threshold` go left.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Classify, LabeledDataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until the other stopping rules apply.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features examined per node; `None` examines all.
    pub m_features: Option<usize>,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_leaf: 1,
            m_features: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        label: u32,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub class_set: Vec<u32>,
}

struct Builder<'a> {
    data: &'a [Vec<f64>],
    classes: Vec<usize>,
    class_set: &'a [u32],
    params: TreeParams,
    dims: usize,
    rng: ChaCha8Rng,
    nodes: Vec<TreeNode>,
}

#[derive(Debug, Clone, Copy)]
struct SplitChoice {
    feature: usize,
    threshold: f64,
    /// `sum(cL^2)/nL + sum(cR^2)/nR`; larger means lower weighted Gini.
    purity: f64,
}

impl Builder<'_> {
    fn counts(&self, points: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.class_set.len()];
        for &p in points {
            c[self.classes[p]] += 1;
        }
        c
    }

    fn majority(counts: &[usize]) -> usize {
        // First maximum is the smallest label since class_set is sorted.
        let mut best = 0;
        for (i, &c) in counts.iter().enumerate() {
            if c > counts[best] {
                best = i;
            }
        }
        best
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        match self.params.m_features {
            Some(m) if m < self.dims => {
                let mut f = index::sample(&mut self.rng, self.dims, m).into_vec();
                f.sort_unstable();
                f
            }
            Some(_) => {
                // Consume the generator exactly as a full draw would.
                let mut f = index::sample(&mut self.rng, self.dims, self.dims).into_vec();
                f.sort_unstable();
                f
            }
            None => (0..self.dims).collect(),
        }
    }

    fn best_split(&mut self, points: &[usize]) -> Option<SplitChoice> {
        let n = points.len();
        let min_leaf = self.params.min_leaf.max(1);
        let total = self.counts(points);
        let mut best: Option<SplitChoice> = None;
        let mut order: Vec<usize> = points.to_vec();
        for feature in self.candidate_features() {
            order.sort_by(|&a, &b| self.data[a][feature].total_cmp(&self.data[b][feature]));
            let mut left = vec![0usize; total.len()];
            let mut left_sq: u64 = 0;
            let mut right_sq: u64 = total.iter().map(|&c| (c * c) as u64).sum();
            for i in 0..n - 1 {
                let c = self.classes[order[i]];
                let (l, r) = (left[c] as u64, (total[c] - left[c]) as u64);
                left_sq += 2 * l + 1;
                right_sq -= 2 * r - 1;
                left[c] += 1;
                let n_left = i + 1;
                let n_right = n - n_left;
                let a = self.data[order[i]][feature];
                let b = self.data[order[i + 1]][feature];
                if !(a < b) || n_left < min_leaf || n_right < min_leaf {
                    continue;
                }
                let purity = left_sq as f64 / n_left as f64 + right_sq as f64 / n_right as f64;
                if best.is_none_or(|s| purity > s.purity) {
                    let mut threshold = a + (b - a) / 2.0;
                    if !(threshold < b) {
                        threshold = a;
                    }
                    best = Some(SplitChoice {
                        feature,
                        threshold,
                        purity,
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, points: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let counts = self.counts(&points);
        let label = self.class_set[Self::majority(&counts)];
        self.nodes.push(TreeNode::Leaf { label });

        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_reached = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached || points.len() < 2 * self.params.min_leaf.max(1) {
            return id;
        }
        let Some(split) = self.best_split(&points) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = points
            .into_iter()
            .partition(|&p| self.data[p][split.feature] <= split.threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

/// Grows a tree on the rows `sample` (duplicates allowed) of `dataset`.
pub(crate) fn grow(
    dataset: &LabeledDataset,
    sample: Vec<usize>,
    params: TreeParams,
) -> Result<DecisionTree> {
    if dataset.is_empty() || sample.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if params.m_features == Some(0) {
        return Err(Error::invalid("m_features must be at least 1"));
    }
    let class_set = dataset.class_set();
    let classes = dataset
        .labels()
        .iter()
        .map(|l| class_set.binary_search(l).expect("label in class set"))
        .collect();
    let mut b = Builder {
        data: dataset.vectors(),
        classes,
        class_set,
        params,
        dims: dataset.dims(),
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        nodes: Vec::new(),
    };
    b.build(sample, 0);
    Ok(DecisionTree {
        nodes: b.nodes,
        class_set: class_set.to_vec(),
    })
}

pub fn fit_tree(
    dataset: &LabeledDataset,
    max_depth: Option<usize>,
    min_leaf: usize,
    seed: u64,
) -> Result<DecisionTree> {
    let params = TreeParams {
        max_depth,
        min_leaf,
        m_features: None,
        seed,
    };
    grow(dataset, (0..dataset.len()).collect(), params)
}

impl DecisionTree {
    pub fn predict(&self, x: &[f64]) -> u32 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { label } => return *label,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

pub fn predict_tree(model: &DecisionTree, x: &[f64]) -> u32 {
    model.predict(x)
}

impl Classify for DecisionTree {
    fn predict(&self, x: &[f64]) -> u32 {
        DecisionTree::predict(self, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureLayout, FeatureName};

    fn ds(rows: &[(f64, u32)]) -> LabeledDataset {
        LabeledDataset::new(
            rows.iter().map(|r| vec![r.0]).collect(),
            rows.iter().map(|r| r.1).collect(),
            FeatureLayout(vec![FeatureName {
                detector: 1,
                name: "x".into(),
            }]),
        )
        .unwrap()
    }

    #[test]
    fn pure_dataset_is_a_leaf() {
        let t = fit_tree(&ds(&[(0.0, 3), (1.0, 3), (5.0, 3)]), None, 1, 0).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict(&[-100.0]), 3);
    }

    #[test]
    fn one_split_separates_two_clusters() {
        let d = ds(&[(0.0, 1), (1.0, 1), (10.0, 2), (11.0, 2)]);
        let t = fit_tree(&d, None, 1, 0).unwrap();
        assert_eq!(t.nodes.len(), 3);
        match t.nodes[0] {
            TreeNode::Split { threshold, .. } => assert!(threshold > 1.0 && threshold < 10.0),
            _ => panic!("expected a split"),
        }
        for (v, l) in d.vectors().iter().zip(d.labels()) {
            assert_eq!(t.predict(v), *l);
        }
    }

    #[test]
    fn depth_zero_is_majority_stump() {
        let d = ds(&[(0.0, 5), (1.0, 5), (2.0, 1), (3.0, 3)]);
        let t = fit_tree(&d, Some(0), 1, 0).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict(&[2.0]), 5);
        // Tie between classes: smaller label.
        let d = ds(&[(0.0, 7), (1.0, 3)]);
        assert_eq!(fit_tree(&d, Some(0), 1, 0).unwrap().predict(&[0.0]), 3);
    }

    #[test]
    fn min_leaf_blocks_small_children() {
        let d = ds(&[(0.0, 1), (1.0, 2), (2.0, 2), (3.0, 2)]);
        let t = fit_tree(&d, None, 2, 0).unwrap();
        for n in &t.nodes {
            if let TreeNode::Split { threshold, .. } = n {
                assert!(*threshold > 1.0 && *threshold < 2.0);
            }
        }
    }

    #[test]
    fn empty_dataset() {
        let d = ds(&[]);
        assert_eq!(fit_tree(&d, None, 1, 0), Err(Error::EmptyDataset));
    }
}
