use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::session::{DetectorId, Session};

use super::{build_dataset_with, cross_validate, AlgorithmSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub algorithm: String,
    pub n_detectors: usize,
    pub detectors: Vec<DetectorId>,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub k: usize,
    pub seed: u64,
    pub tau: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn accuracy(&self, algorithm: &str, n_detectors: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.algorithm == algorithm && r.n_detectors == n_detectors)
            .map(|r| r.mean_accuracy)
    }

    /// `algorithm,n_detectors,detectors,mean_accuracy` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("algorithm,n_detectors,detectors,mean_accuracy\n");
        for r in &self.rows {
            let ids: Vec<String> = r.detectors.iter().map(|d| d.to_string()).collect();
            out.push_str(&format!(
                "{},{},{},{:.6}\n",
                r.algorithm,
                r.n_detectors,
                ids.join(" "),
                r.mean_accuracy
            ));
        }
        out
    }
}

/// Cross-validated accuracy of every algorithm on the first `n` detectors of
/// `order`, for `n = 1..=order.len()`.
///
/// Features are extracted once; each row selects the columns of its subset.
pub fn detector_sweep(
    sessions: &[Session],
    specs: &[AlgorithmSpec],
    order: &[DetectorId],
    k: usize,
    seed: u64,
    tau: f64,
    bins: usize,
) -> Result<SweepReport> {
    if order.is_empty() {
        return Err(Error::LayoutMismatch("empty detector order".into()));
    }
    let full = build_dataset_with(sessions, tau, &FeatureConfig::new(order, bins)?, false)?;
    let mut rows = Vec::with_capacity(specs.len() * order.len());
    for spec in specs {
        for n in 1..=order.len() {
            let detectors = order[..n].to_vec();
            let ds = full.select_detectors(&detectors)?;
            let report = cross_validate(spec, &ds, k, seed)?;
            rows.push(SweepRow {
                algorithm: spec.name().to_string(),
                n_detectors: n,
                detectors,
                fold_accuracies: report.fold_accuracies,
                mean_accuracy: report.mean_accuracy,
            });
        }
    }
    Ok(SweepReport { k, seed, tau, rows })
}
