//! Stratified k-fold cross-validation.

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{AlgorithmSpec, Classify, LabeledDataset};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<u32>,
    /// `counts[truth][predicted]`, indexed like `classes`.
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(classes: &[u32]) -> Self {
        Self {
            classes: classes.to_vec(),
            counts: vec![vec![0; classes.len()]; classes.len()],
        }
    }

    pub fn record(&mut self, truth: u32, predicted: u32) {
        let t = self
            .classes
            .binary_search(&truth)
            .expect("truth in class set");
        let p = self
            .classes
            .binary_search(&predicted)
            .expect("prediction in class set");
        self.counts[t][p] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.correct() as f64 / n as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
    /// Set when stratification was impossible and folds were drawn unstratified.
    pub warning: Option<String>,
    /// Fold index of every sample.
    pub fold_assignment: Vec<usize>,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub confusion: Vec<ConfusionMatrix>,
}

/// Fold index per sample and whether stratification succeeded.
///
/// Each class is shuffled and laid end to end; position `p` of the combined
/// sequence goes to fold `p % k`, so fold sizes and per-class fold counts each
/// differ by at most one.
pub fn assign_folds(labels: &[u32], k: usize, seed: u64) -> Result<(Vec<usize>, bool)> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be at least 2, got {k}")));
    }
    if labels.len() < k {
        return Err(Error::invalid(format!(
            "{} samples cannot fill {k} folds",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let members: Vec<Vec<usize>> = classes
        .iter()
        .map(|c| (0..labels.len()).filter(|&i| labels[i] == *c).collect())
        .collect();
    let stratified = members.iter().all(|m| m.len() >= k);

    let sequence: Vec<usize> = if stratified {
        members
            .into_iter()
            .flat_map(|mut m| {
                m.shuffle(&mut rng);
                m
            })
            .collect()
    } else {
        let mut all: Vec<usize> = (0..labels.len()).collect();
        all.shuffle(&mut rng);
        all
    };
    let mut folds = vec![0; labels.len()];
    for (p, &i) in sequence.iter().enumerate() {
        folds[i] = p % k;
    }
    Ok((folds, stratified))
}

/// Cross-validates an arbitrary learner: `fit(train, seed)` is called once per fold.
pub fn cross_validate_with<F>(
    dataset: &LabeledDataset,
    k: usize,
    seed: u64,
    fit: F,
) -> Result<CvReport>
where
    F: Fn(&LabeledDataset, u64) -> Result<Box<dyn Classify>> + Sync,
{
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (fold_assignment, stratified) = assign_folds(dataset.labels(), k, seed)?;
    let warning = (!stratified).then(|| {
        let msg = format!("a class has fewer than {k} members; folds drawn without stratification");
        warn!("{msg}");
        msg
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_F01D);
    let fold_seeds: Vec<u64> = (0..k).map(|_| rng.random()).collect();

    let confusion = (0..k)
        .into_par_iter()
        .map(|fold| {
            let train: Vec<usize> = (0..dataset.len())
                .filter(|&i| fold_assignment[i] != fold)
                .collect();
            let test: Vec<usize> = (0..dataset.len())
                .filter(|&i| fold_assignment[i] == fold)
                .collect();
            let model = fit(&dataset.subset(&train), fold_seeds[fold])?;
            let mut cm = ConfusionMatrix::new(dataset.class_set());
            for &i in &test {
                cm.record(dataset.labels()[i], model.predict(&dataset.vectors()[i]));
            }
            Ok(cm)
        })
        .collect::<Result<Vec<_>>>()?;

    let fold_accuracies: Vec<f64> = confusion.iter().map(|c| c.accuracy()).collect();
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / k as f64;
    Ok(CvReport {
        k,
        seed,
        stratified,
        warning,
        fold_assignment,
        fold_accuracies,
        mean_accuracy,
        confusion,
    })
}

pub fn cross_validate(
    spec: &AlgorithmSpec,
    dataset: &LabeledDataset,
    k: usize,
    seed: u64,
) -> Result<CvReport> {
    cross_validate_with(dataset, k, seed, |train, s| {
        spec.fit(train, s).map(|m| Box::new(m) as Box<dyn Classify>)
    })
}
