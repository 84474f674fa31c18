//! Supervised people counting from windowed feature vectors.

pub mod cv;
pub mod dataset;
pub mod forest;
pub mod knn;
pub mod sweep;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureExtractor, FeatureLayout};
use crate::session::WindowSet;

pub use cv::{assign_folds, cross_validate, cross_validate_with, ConfusionMatrix, CvReport};
pub use dataset::{build_dataset, build_dataset_with, LabeledDataset};
pub use forest::{fit_forest, predict_forest, ForestParams, RandomForest};
pub use knn::{fit_knn, predict_knn, KnnModel};
pub use sweep::{detector_sweep, SweepReport, SweepRow};
pub use tree::{fit_tree, predict_tree, DecisionTree, TreeParams};

/// A fitted classifier mapping a raw feature vector to a person count.
pub trait Classify: Send + Sync {
    fn predict(&self, x: &[f64]) -> u32;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AlgorithmSpec {
    Knn {
        k_neighbors: usize,
    },
    Tree {
        max_depth: Option<usize>,
        min_leaf: usize,
    },
    Forest {
        trees: usize,
        max_depth: Option<usize>,
        m_features: Option<usize>,
        bootstrap: bool,
    },
}

impl AlgorithmSpec {
    pub fn knn() -> Self {
        AlgorithmSpec::Knn {
            k_neighbors: knn::DEFAULT_NEIGHBORS,
        }
    }

    pub fn tree() -> Self {
        AlgorithmSpec::Tree {
            max_depth: None,
            min_leaf: 1,
        }
    }

    pub fn forest() -> Self {
        AlgorithmSpec::Forest {
            trees: forest::DEFAULT_TREES,
            max_depth: None,
            m_features: None,
            bootstrap: true,
        }
    }

    pub fn defaults() -> [AlgorithmSpec; 3] {
        [Self::knn(), Self::tree(), Self::forest()]
    }

    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmSpec::Knn { .. } => "knn",
            AlgorithmSpec::Tree { .. } => "tree",
            AlgorithmSpec::Forest { .. } => "forest",
        }
    }

    pub fn fit(&self, dataset: &LabeledDataset, seed: u64) -> Result<FittedClassifier> {
        Ok(match *self {
            AlgorithmSpec::Knn { k_neighbors } => {
                FittedClassifier::Knn(fit_knn(dataset, k_neighbors)?)
            }
            AlgorithmSpec::Tree {
                max_depth,
                min_leaf,
            } => FittedClassifier::Tree(fit_tree(dataset, max_depth, min_leaf, seed)?),
            AlgorithmSpec::Forest {
                trees,
                max_depth,
                m_features,
                bootstrap,
            } => FittedClassifier::Forest(fit_forest(
                dataset,
                &ForestParams {
                    trees,
                    max_depth,
                    min_leaf: 1,
                    m_features,
                    bootstrap,
                    seed,
                },
            )?),
        })
    }
}

impl fmt::Display for AlgorithmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "knn" | "kneighbors" => Ok(Self::knn()),
            "tree" | "decision-tree" => Ok(Self::tree()),
            "forest" | "random-forest" => Ok(Self::forest()),
            _ => Err(Error::invalid(format!("unknown counting algorithm `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "state", rename_all = "lowercase")]
pub enum FittedClassifier {
    Knn(KnnModel),
    Tree(DecisionTree),
    Forest(RandomForest),
}

impl Classify for FittedClassifier {
    fn predict(&self, x: &[f64]) -> u32 {
        match self {
            FittedClassifier::Knn(m) => m.predict(x),
            FittedClassifier::Tree(m) => m.predict(x),
            FittedClassifier::Forest(m) => m.predict(x),
        }
    }
}

/// A fitted classifier bound to the feature configuration it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountModel {
    pub spec: AlgorithmSpec,
    pub features: FeatureConfig,
    pub layout: FeatureLayout,
    pub class_set: Vec<u32>,
    pub seed: u64,
    pub fitted: FittedClassifier,
}

impl CountModel {
    pub fn fit(
        spec: AlgorithmSpec,
        dataset: &LabeledDataset,
        features: FeatureConfig,
        seed: u64,
    ) -> Result<Self> {
        if *dataset.layout() != features.layout() {
            return Err(Error::LayoutMismatch(
                "dataset layout does not match the feature configuration".into(),
            ));
        }
        Ok(Self {
            fitted: spec.fit(dataset, seed)?,
            spec,
            layout: dataset.layout().clone(),
            class_set: dataset.class_set().to_vec(),
            features,
            seed,
        })
    }

    pub fn predict_vector(&self, x: &[f64]) -> Result<u32> {
        if x.len() != self.layout.len() {
            return Err(Error::LayoutMismatch(format!(
                "vector of length {} for a model expecting {}",
                x.len(),
                self.layout.len()
            )));
        }
        Ok(self.fitted.predict(x))
    }

    pub fn predict_window(&self, ws: &WindowSet) -> Result<u32> {
        let fv = FeatureExtractor::new(self.features.clone())
            .extract(ws)
            .map_err(|e| match e {
                Error::DetectorMismatch(m) => Error::LayoutMismatch(m),
                other => other,
            })?;
        self.predict_vector(&fv.values)
    }
}
