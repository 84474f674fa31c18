//! Binary presence detection calibrated on noise-only recordings.

pub mod iforest;
pub mod threshold;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::WindowSet;

pub use iforest::{
    detect_isolation_forest, fit_isolation_forest, fit_isolation_forest_windows,
    IsolationForestModel, IsolationForestParams,
};
pub use threshold::{
    calibrate_method1, calibrate_method2a, calibrate_method2b, detect_method1, detect_method2a,
    detect_method2b, Method1Model, Method2aModel, Method2bModel,
};

/// Outcome for one window set: `label` is 0 (noise) or 1 (presence).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresenceDecision {
    pub label: u8,
    /// Method 1 only; empty for the other methods.
    pub per_detector_votes: Vec<u8>,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresenceMethod {
    M1,
    M2a,
    M2b,
    #[serde(rename = "iforest")]
    IsolationForest,
}

impl fmt::Display for PresenceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PresenceMethod::M1 => "m1",
            PresenceMethod::M2a => "m2a",
            PresenceMethod::M2b => "m2b",
            PresenceMethod::IsolationForest => "iforest",
        })
    }
}

impl FromStr for PresenceMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(PresenceMethod::M1),
            "m2a" => Ok(PresenceMethod::M2a),
            "m2b" => Ok(PresenceMethod::M2b),
            "iforest" | "isolation-forest" => Ok(PresenceMethod::IsolationForest),
            _ => Err(Error::invalid(format!("unknown presence method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum PresenceModel {
    M1(Method1Model),
    M2a(Method2aModel),
    M2b(Method2bModel),
    #[serde(rename = "iforest")]
    IsolationForest(IsolationForestModel),
}

impl PresenceModel {
    pub fn method(&self) -> PresenceMethod {
        match self {
            PresenceModel::M1(_) => PresenceMethod::M1,
            PresenceModel::M2a(_) => PresenceMethod::M2a,
            PresenceModel::M2b(_) => PresenceMethod::M2b,
            PresenceModel::IsolationForest(_) => PresenceMethod::IsolationForest,
        }
    }

    pub fn detect(&self, ws: &WindowSet) -> Result<PresenceDecision> {
        match self {
            PresenceModel::M1(m) => m.detect(ws),
            PresenceModel::M2a(m) => m.detect(ws),
            PresenceModel::M2b(m) => m.detect(ws),
            PresenceModel::IsolationForest(m) => m.detect(ws),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub start: f64,
    pub truth: Option<u8>,
    pub predicted: u8,
    pub score: f64,
}

/// Accuracy over the labeled windows of one session plus the full decision trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresenceReport {
    pub method: PresenceMethod,
    pub windows: usize,
    pub labeled: usize,
    pub correct: usize,
    pub accuracy: Option<f64>,
    pub trace: Vec<TraceEntry>,
}

impl PresenceReport {
    pub fn from_trace(method: PresenceMethod, trace: Vec<TraceEntry>) -> Self {
        let labeled = trace.iter().filter(|t| t.truth.is_some()).count();
        let correct = trace
            .iter()
            .filter(|t| t.truth == Some(t.predicted))
            .count();
        PresenceReport {
            method,
            windows: trace.len(),
            labeled,
            correct,
            accuracy: (labeled > 0).then(|| correct as f64 / labeled as f64),
            trace,
        }
    }
}

pub fn evaluate_presence(model: &PresenceModel, windows: &[WindowSet]) -> Result<PresenceReport> {
    let trace = windows
        .iter()
        .map(|ws| {
            let d = model.detect(ws)?;
            Ok(TraceEntry {
                start: ws.start,
                truth: ws.label.map(|l| l.presence()),
                predicted: d.label,
                score: d.score,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PresenceReport::from_trace(model.method(), trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(truth: u8, predicted: u8) -> TraceEntry {
        TraceEntry {
            start: 0.0,
            truth: Some(truth),
            predicted,
            score: 0.0,
        }
    }

    #[test]
    fn report_accuracy() {
        let perfect: Vec<_> = (0..60).map(|_| entry(1, 1)).collect();
        let r = PresenceReport::from_trace(PresenceMethod::M1, perfect);
        assert_eq!(r.accuracy, Some(1.0));
        assert_eq!(r.trace.len(), 60);

        let mut trace: Vec<_> = (0..54).map(|_| entry(1, 1)).collect();
        trace.extend((0..6).map(|_| entry(1, 0)));
        let r = PresenceReport::from_trace(PresenceMethod::M1, trace);
        assert!((r.accuracy.unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(r.windows, 60);
    }

    #[test]
    fn method_names_round_trip() {
        for m in [
            PresenceMethod::M1,
            PresenceMethod::M2a,
            PresenceMethod::M2b,
            PresenceMethod::IsolationForest,
        ] {
            assert_eq!(m.to_string().parse::<PresenceMethod>().unwrap(), m);
        }
    }
}
