use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::tree::{grow, DecisionTree, TreeParams};
use super::{Classify, LabeledDataset};

pub const DEFAULT_TREES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// `None` selects `ceil(sqrt(d))`.
    pub m_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            trees: DEFAULT_TREES,
            max_depth: None,
            min_leaf: 1,
            m_features: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub class_set: Vec<u32>,
}

pub fn default_m_features(dims: usize) -> usize {
    ((dims as f64).sqrt().ceil() as usize).max(1)
}

pub fn fit_forest(dataset: &LabeledDataset, params: &ForestParams) -> Result<RandomForest> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if params.trees == 0 {
        return Err(Error::invalid("forest needs at least one tree"));
    }
    let n = dataset.len();
    let m = params
        .m_features
        .unwrap_or_else(|| default_m_features(dataset.dims()));
    let mut master = ChaCha8Rng::seed_from_u64(params.seed);
    let seeds: Vec<u64> = (0..params.trees).map(|_| master.random()).collect();
    let trees = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sample: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let tree_params = TreeParams {
                max_depth: params.max_depth,
                min_leaf: params.min_leaf,
                m_features: Some(m),
                seed: rng.random(),
            };
            grow(dataset, sample, tree_params)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RandomForest {
        trees,
        class_set: dataset.class_set().to_vec(),
    })
}

impl RandomForest {
    /// Majority vote over trees; ties go to the smaller label.
    pub fn predict(&self, x: &[f64]) -> u32 {
        let mut votes = vec![0usize; self.class_set.len()];
        for t in &self.trees {
            let label = t.predict(x);
            let i = self
                .class_set
                .binary_search(&label)
                .expect("tree label in class set");
            votes[i] += 1;
        }
        let mut best = 0;
        for (i, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = i;
            }
        }
        self.class_set[best]
    }
}

pub fn predict_forest(model: &RandomForest, x: &[f64]) -> u32 {
    model.predict(x)
}

impl Classify for RandomForest {
    fn predict(&self, x: &[f64]) -> u32 {
        RandomForest::predict(self, x)
    }
}
