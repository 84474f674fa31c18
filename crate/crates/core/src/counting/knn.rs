//! k-nearest-neighbor classifier on z-scored features.

use std::collections::BinaryHeap;

use ordered::Candidate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Classify, LabeledDataset};

pub const DEFAULT_NEIGHBORS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// Standardized training vectors.
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<u32>,
    pub class_set: Vec<u32>,
}

mod ordered {
    use std::cmp::Ordering;

    /// Heap entry ordered by (squared distance, index).
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct Candidate {
        pub dist2: f64,
        pub index: usize,
    }

    impl Eq for Candidate {}

    impl Ord for Candidate {
        fn cmp(&self, other: &Self) -> Ordering {
            self.dist2
                .total_cmp(&other.dist2)
                .then(self.index.cmp(&other.index))
        }
    }

    impl PartialOrd for Candidate {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }
}

pub fn fit_knn(dataset: &LabeledDataset, k: usize) -> Result<KnnModel> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if k == 0 || k > dataset.len() {
        return Err(Error::invalid(format!(
            "k_neighbors = {k} must lie in 1..={}",
            dataset.len()
        )));
    }
    let n = dataset.len() as f64;
    let d = dataset.dims();
    let mut means = vec![0.0; d];
    for v in dataset.vectors() {
        for (m, x) in means.iter_mut().zip(v) {
            *m += x / n;
        }
    }
    let mut scales = vec![0.0; d];
    for v in dataset.vectors() {
        for ((s, x), m) in scales.iter_mut().zip(v).zip(&means) {
            *s += (x - m) * (x - m);
        }
    }
    for s in &mut scales {
        let std = if n > 1.0 {
            (*s / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        *s = if std > 0.0 && std.is_finite() {
            std
        } else {
            1.0
        };
    }
    let mut model = KnnModel {
        k,
        means,
        scales,
        points: Vec::with_capacity(dataset.len()),
        labels: dataset.labels().to_vec(),
        class_set: dataset.class_set().to_vec(),
    };
    model.points = dataset
        .vectors()
        .iter()
        .map(|v| model.standardize(v))
        .collect();
    Ok(model)
}

impl KnnModel {
    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.means)
            .zip(&self.scales)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }

    /// The `k` nearest training points to a standardized query as
    /// `(squared distance, index)`, ascending, ties broken by index.
    ///
    /// Keeps a bounded max-heap and abandons a distance sum as soon as it
    /// exceeds the current k-th best.
    pub fn nearest(&self, z: &[f64]) -> Vec<(f64, usize)> {
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(self.k + 1);
        for (index, p) in self.points.iter().enumerate() {
            let bound = if heap.len() == self.k {
                heap.peek().map_or(f64::INFINITY, |c| c.dist2)
            } else {
                f64::INFINITY
            };
            let mut dist2 = 0.0;
            let mut abandoned = false;
            for (a, b) in p.iter().zip(z) {
                dist2 += (a - b) * (a - b);
                if dist2 > bound {
                    abandoned = true;
                    break;
                }
            }
            if abandoned {
                continue;
            }
            let cand = Candidate { dist2, index };
            if heap.len() < self.k {
                heap.push(cand);
            } else if heap.peek().is_some_and(|worst| cand < *worst) {
                heap.pop();
                heap.push(cand);
            }
        }
        let mut out: Vec<(f64, usize)> = heap.into_iter().map(|c| (c.dist2, c.index)).collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out
    }

    pub fn predict(&self, x: &[f64]) -> u32 {
        let z = self.standardize(x);
        vote(&self.nearest(&z), &self.labels)
    }
}

/// Majority label; ties go to the class whose neighbors have the smaller
/// summed distance, then to the smaller label.
pub fn vote(neighbors: &[(f64, usize)], labels: &[u32]) -> u32 {
    let mut tally: Vec<(u32, usize, f64)> = Vec::new();
    for &(d2, i) in neighbors {
        let label = labels[i];
        match tally.iter_mut().find(|t| t.0 == label) {
            Some(t) => {
                t.1 += 1;
                t.2 += d2.sqrt();
            }
            None => tally.push((label, 1, d2.sqrt())),
        }
    }
    tally
        .into_iter()
        .min_by(|a, b| b.1.cmp(&a.1).then(a.2.total_cmp(&b.2)).then(a.0.cmp(&b.0)))
        .map(|t| t.0)
        .expect("at least one neighbor")
}

pub fn predict_knn(model: &KnnModel, x: &[f64]) -> u32 {
    model.predict(x)
}

impl Classify for KnnModel {
    fn predict(&self, x: &[f64]) -> u32 {
        KnnModel::predict(self, x)
    }
}
