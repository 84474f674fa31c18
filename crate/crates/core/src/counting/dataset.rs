use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureExtractor, FeatureLayout};
use crate::session::{split_windows, DetectorId, Session};

/// Feature vectors with person-count labels under one shared layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    vectors: Vec<Vec<f64>>,
    labels: Vec<u32>,
    layout: FeatureLayout,
    class_set: Vec<u32>,
}

impl LabeledDataset {
    pub fn new(vectors: Vec<Vec<f64>>, labels: Vec<u32>, layout: FeatureLayout) -> Result<Self> {
        if vectors.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} vectors but {} labels",
                vectors.len(),
                labels.len()
            )));
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != layout.len()) {
            return Err(Error::LayoutMismatch(format!(
                "vector of length {} under a layout of {}",
                v.len(),
                layout.len()
            )));
        }
        if let Some(i) = vectors
            .iter()
            .position(|v| v.iter().any(|x| !x.is_finite()))
        {
            return Err(Error::MalformedFeature(format!("vector {i} is not finite")));
        }
        let mut class_set = labels.clone();
        class_set.sort_unstable();
        class_set.dedup();
        Ok(Self {
            vectors,
            labels,
            layout,
            class_set,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.layout.len()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    pub fn class_set(&self) -> &[u32] {
        &self.class_set
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        let vectors = indices.iter().map(|&i| self.vectors[i].clone()).collect();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        // Rows were validated on construction.
        LabeledDataset::new(vectors, labels, self.layout.clone())
            .expect("subset of a valid dataset")
    }

    /// Keeps only the columns belonging to `detectors`.
    pub fn select_detectors(&self, detectors: &[DetectorId]) -> Result<LabeledDataset> {
        let cols: Vec<usize> = (0..self.layout.len())
            .filter(|&c| detectors.contains(&self.layout.0[c].detector))
            .collect();
        if cols.is_empty() {
            return Err(Error::LayoutMismatch(format!(
                "none of detectors {detectors:?} appear in the dataset layout"
            )));
        }
        let layout = FeatureLayout(cols.iter().map(|&c| self.layout.0[c].clone()).collect());
        let vectors = self
            .vectors
            .iter()
            .map(|v| cols.iter().map(|&c| v[c]).collect())
            .collect();
        LabeledDataset::new(vectors, self.labels.clone(), layout)
    }
}

/// Windows every session into `tau`-second slices and extracts features over
/// the configured detectors. Noise sessions are skipped unless `include_noise`.
pub fn build_dataset_with(
    sessions: &[Session],
    tau: f64,
    config: &FeatureConfig,
    include_noise: bool,
) -> Result<LabeledDataset> {
    let extractor = FeatureExtractor::new(config.clone());
    let per_session = sessions
        .par_iter()
        .filter(|s| include_noise || !s.label.is_noise())
        .map(|s| {
            let windows = split_windows(s, tau)?;
            windows
                .iter()
                .map(|ws| {
                    extractor
                        .extract(ws)
                        .map(|fv| (fv.values, s.label.count()))
                        .map_err(|e| match e {
                            Error::DetectorMismatch(m) => Error::LayoutMismatch(m),
                            other => other,
                        })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let (vectors, labels) = per_session.into_iter().flatten().unzip();
    LabeledDataset::new(vectors, labels, extractor.layout().as_ref().clone())
}

pub fn build_dataset(
    sessions: &[Session],
    tau: f64,
    detectors: &[DetectorId],
    bins: usize,
) -> Result<LabeledDataset> {
    let config = FeatureConfig::new(detectors, bins)?;
    build_dataset_with(sessions, tau, &config, false)
}
