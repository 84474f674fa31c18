//! Versioned JSON model files.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::counting::CountModel;
use crate::error::{Error, Result};
use crate::features::FeatureLayout;
use crate::presence::PresenceModel;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "model", rename_all = "lowercase")]
pub enum ModelPayload {
    Presence(PresenceModel),
    Count(CountModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    /// `m1`, `m2a`, `m2b`, `iforest`, `knn`, `tree` or `forest`.
    pub kind: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub tau: f64,
    pub rate: f64,
    pub layout: Option<FeatureLayout>,
    /// Options the model was built with, echoed for inspection.
    pub config: serde_json::Value,
    pub payload: ModelPayload,
}

impl ModelFile {
    pub fn new(payload: ModelPayload, tau: f64, rate: f64, config: serde_json::Value) -> Self {
        let (kind, layout) = match &payload {
            ModelPayload::Presence(m) => {
                let layout = match m {
                    PresenceModel::IsolationForest(f) => Some(f.features.layout()),
                    _ => None,
                };
                (m.method().to_string(), layout)
            }
            ModelPayload::Count(m) => (m.spec.name().to_string(), Some(m.layout.clone())),
        };
        let created_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            format_version: FORMAT_VERSION,
            kind,
            created_at,
            tau,
            rate,
            layout,
            config,
            payload,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::ModelMismatch(format!("not a model file: {e}")))?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => {
                return Err(Error::ModelMismatch(format!(
                    "model format version {v} is not supported (expected {FORMAT_VERSION})"
                )))
            }
            None => {
                return Err(Error::ModelMismatch(
                    "model file has no format_version".into(),
                ))
            }
        }
        serde_json::from_value(value)
            .map_err(|e| Error::ModelMismatch(format!("invalid model file: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Refuses use under a window length or rate other than the model's.
    pub fn check_config(&self, tau: f64, rate: f64) -> Result<()> {
        let same = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs());
        if !same(self.tau, tau) || !same(self.rate, rate) {
            return Err(Error::ModelMismatch(format!(
                "model built for tau={} s, rate={}/s; requested tau={tau} s, rate={rate}/s",
                self.tau, self.rate
            )));
        }
        Ok(())
    }
}
