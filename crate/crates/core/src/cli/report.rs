use serde::{Deserialize, Serialize};

use crate::counting::{ConfusionMatrix, CvReport};
use crate::presence::PresenceReport;
use crate::session::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectReport {
    pub model_kind: String,
    pub tau: f64,
    pub rate: f64,
    pub session: String,
    pub session_label: Label,
    pub presence: PresenceReport,
}

impl DetectReport {
    /// `start_s,truth,predicted,score` rows of the decision trace.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("start_s,truth,predicted,score\n");
        for t in &self.presence.trace {
            let truth = t.truth.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{}\n",
                t.start, truth, t.predicted, t.score
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountPrediction {
    pub start: f64,
    pub truth: Option<u32>,
    pub predicted: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountSessionReport {
    pub session: String,
    pub session_label: Label,
    pub predictions: Vec<CountPrediction>,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountEvaluation {
    pub model_kind: String,
    pub sessions: Vec<CountSessionReport>,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresenceEvaluation {
    pub model_kind: String,
    pub sessions: Vec<DetectReport>,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub algorithm: String,
    pub samples: usize,
    pub features: usize,
    pub class_set: Vec<u32>,
    pub cv: CvReport,
}
