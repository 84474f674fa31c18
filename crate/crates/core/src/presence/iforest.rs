//! Isolation forest trained on noise feature vectors only.
//!
//! Each tree is grown on a random subsample of `psi` vectors. At every node a
//! feature is drawn uniformly among those that are not constant on the node
//! and the split value uniformly in `[min, max)`; points `<= split` go left.
//! Trees stop at depth `ceil(log2 psi)`, at single points, or when all points
//! coincide. The anomaly score is `2^(-E[h(x)] / c(psi))`.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureExtractor, FeatureVector};
use crate::session::WindowSet;

use super::PresenceDecision;

pub const DEFAULT_TREES: usize = 100;
pub const DEFAULT_MAX_SUBSAMPLE: usize = 256;
pub const DEFAULT_QUANTILE: f64 = 0.98;

/// Harmonic number `H(n)`.
fn harmonic(n: usize) -> f64 {
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

/// Average path length of an unsuccessful binary-search-tree lookup over `n`
/// points: `2 H(n - 1) - 2 (n - 1) / n`, zero for `n <= 1`.
pub fn average_path_length(n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let m = (n - 1) as f64;
    2.0 * harmonic(n - 1) - 2.0 * m / n as f64
}

/// `ceil(log2 psi)`.
pub fn height_limit(psi: usize) -> usize {
    psi.next_power_of_two().trailing_zeros() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        size: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    nodes: Vec<Node>,
}

impl IsolationTree {
    fn grow(data: &[Vec<f64>], sample: Vec<usize>, limit: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut tree = IsolationTree { nodes: Vec::new() };
        tree.build(data, sample, 0, limit, rng);
        tree
    }

    fn build(
        &mut self,
        data: &[Vec<f64>],
        points: Vec<usize>,
        depth: usize,
        limit: usize,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { size: points.len() });
        if depth >= limit || points.len() <= 1 {
            return id;
        }
        let dims = data[points[0]].len();
        let ranges: Vec<(usize, f64, f64)> = (0..dims)
            .filter_map(|f| {
                let (lo, hi) = points
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
                        (lo.min(data[p][f]), hi.max(data[p][f]))
                    });
                (hi > lo).then_some((f, lo, hi))
            })
            .collect();
        if ranges.is_empty() {
            return id;
        }
        let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
        let threshold = lo + rng.random::<f64>() * (hi - lo);
        let (l, r): (Vec<usize>, Vec<usize>) = points
            .into_iter()
            .partition(|&p| data[p][feature] <= threshold);
        let left = self.build(data, l, depth + 1, limit, rng);
        let right = self.build(data, r, depth + 1, limit, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Depth of the external node reached by `x` plus `c(size)` for its size.
    pub fn path_length(&self, x: &[f64]) -> f64 {
        let mut node = 0;
        let mut depth = 0usize;
        loop {
            match &self.nodes[node] {
                Node::Leaf { size } => return depth as f64 + average_path_length(*size),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                    depth += 1;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsolationForestParams {
    pub trees: usize,
    /// `None` selects `min(256, training size)`.
    pub subsample: Option<usize>,
    pub quantile: f64,
    pub seed: u64,
}

impl Default for IsolationForestParams {
    fn default() -> Self {
        Self {
            trees: DEFAULT_TREES,
            subsample: None,
            quantile: DEFAULT_QUANTILE,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForestModel {
    pub trees: Vec<IsolationTree>,
    pub subsample_size: usize,
    pub tree_count: usize,
    pub score_threshold: f64,
    pub quantile: f64,
    pub seed: u64,
    pub features: FeatureConfig,
}

/// Fits a forest on raw vectors; the layout check is the caller's job.
pub fn fit_vectors(
    data: &[Vec<f64>],
    params: &IsolationForestParams,
) -> Result<(Vec<IsolationTree>, usize)> {
    if params.trees == 0 {
        return Err(Error::invalid("tree count must be at least 1"));
    }
    let psi = params
        .subsample
        .unwrap_or(DEFAULT_MAX_SUBSAMPLE.min(data.len()));
    if psi < 2 || data.len() < psi {
        return Err(Error::InsufficientCalibration(format!(
            "{} training vectors for a subsample size of {psi} (need at least 2)",
            data.len()
        )));
    }
    if let Some(i) = data.iter().position(|v| v.iter().any(|x| !x.is_finite())) {
        return Err(Error::MalformedFeature(format!(
            "training vector {i} is not finite"
        )));
    }
    let limit = height_limit(psi);
    let mut master = ChaCha8Rng::seed_from_u64(params.seed);
    let seeds: Vec<u64> = (0..params.trees).map(|_| master.random()).collect();
    let trees = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let sample = index::sample(&mut rng, data.len(), psi).into_vec();
            IsolationTree::grow(data, sample, limit, &mut rng)
        })
        .collect();
    Ok((trees, psi))
}

pub fn mean_path_length(trees: &[IsolationTree], x: &[f64]) -> f64 {
    trees.iter().map(|t| t.path_length(x)).sum::<f64>() / trees.len() as f64
}

pub fn anomaly_score(trees: &[IsolationTree], psi: usize, x: &[f64]) -> f64 {
    2f64.powf(-mean_path_length(trees, x) / average_path_length(psi))
}

pub fn fit_isolation_forest(
    noise_features: &[FeatureVector],
    config: &FeatureConfig,
    params: &IsolationForestParams,
) -> Result<IsolationForestModel> {
    if !(params.quantile > 0.0 && params.quantile <= 1.0) {
        return Err(Error::invalid(format!(
            "quantile must lie in (0, 1], got {}",
            params.quantile
        )));
    }
    let layout = config.layout();
    if let Some(v) = noise_features.iter().find(|v| *v.layout != layout) {
        return Err(Error::LayoutMismatch(format!(
            "training vector has {} features, configuration expects {}",
            v.layout.len(),
            layout.len()
        )));
    }
    for v in noise_features {
        v.ensure_finite()?;
    }
    let data: Vec<Vec<f64>> = noise_features.iter().map(|v| v.values.clone()).collect();
    let (trees, psi) = fit_vectors(&data, params)?;

    let mut scores: Vec<f64> = data.iter().map(|x| anomaly_score(&trees, psi, x)).collect();
    scores.sort_by(f64::total_cmp);
    let rank = ((params.quantile * scores.len() as f64).ceil() as usize).clamp(1, scores.len());
    let score_threshold = scores[rank - 1];

    Ok(IsolationForestModel {
        tree_count: trees.len(),
        trees,
        subsample_size: psi,
        score_threshold,
        quantile: params.quantile,
        seed: params.seed,
        features: config.clone(),
    })
}

/// Fits from noise window sets, extracting features with `config`.
pub fn fit_isolation_forest_windows(
    noise_windows: &[WindowSet],
    config: &FeatureConfig,
    params: &IsolationForestParams,
) -> Result<IsolationForestModel> {
    if let Some(ws) = noise_windows
        .iter()
        .find(|ws| !matches!(ws.label, Some(l) if l.is_noise()))
    {
        return Err(Error::InsufficientCalibration(format!(
            "calibration window at {} s is not labeled noise",
            ws.start
        )));
    }
    let extractor = FeatureExtractor::new(config.clone());
    let features = noise_windows
        .iter()
        .map(|ws| extractor.extract(ws))
        .collect::<Result<Vec<_>>>()?;
    fit_isolation_forest(&features, config, params)
}

impl IsolationForestModel {
    pub fn score_vector(&self, fv: &FeatureVector) -> Result<f64> {
        if *fv.layout != self.features.layout() {
            return Err(Error::LayoutMismatch(format!(
                "vector has {} features, model expects {}",
                fv.layout.len(),
                self.features.layout().len()
            )));
        }
        fv.ensure_finite()?;
        Ok(self.score(&fv.values))
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        anomaly_score(&self.trees, self.subsample_size, x)
    }

    pub fn detect(&self, ws: &WindowSet) -> Result<PresenceDecision> {
        let extractor = FeatureExtractor::new(self.features.clone());
        let fv = extractor.extract(ws).map_err(|e| match e {
            Error::DetectorMismatch(m) => Error::LayoutMismatch(m),
            other => other,
        })?;
        let score = self.score_vector(&fv)?;
        Ok(PresenceDecision {
            label: u8::from(score > self.score_threshold),
            per_detector_votes: Vec::new(),
            score,
        })
    }
}

pub fn detect_isolation_forest(
    model: &IsolationForestModel,
    ws: &WindowSet,
) -> Result<PresenceDecision> {
    model.detect(ws)
}
