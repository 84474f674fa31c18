//! Noise-calibrated threshold detectors.
//!
//! * Method 1 compares each detector's window std against `f` times its mean
//!   noise std and takes a majority vote over detectors.
//! * Method 2a multiplies the per-detector window stds and compares the
//!   product with the product of full-period noise stds.
//! * Method 2b multiplies the aligned raw samples of all detectors at each
//!   instant and compares the std of that product series with its noise value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{sample_std, window_stats};
use crate::session::{DetectorId, Session, WindowSet};

use super::PresenceDecision;

pub const DEFAULT_F: f64 = 2.2;
pub const DEFAULT_FACTOR: f64 = 3.0;
pub const MIN_CALIBRATION_WINDOWS: usize = 10;

fn require_noise_windows(windows: &[WindowSet]) -> Result<()> {
    for (i, ws) in windows.iter().enumerate() {
        match ws.label {
            Some(l) if l.is_noise() => {}
            other => {
                return Err(Error::InsufficientCalibration(format!(
                    "calibration window {i} is labeled {other:?}, expected noise"
                )))
            }
        }
    }
    Ok(())
}

fn require_noise_session(session: &Session) -> Result<()> {
    if !session.label.is_noise() {
        return Err(Error::InsufficientCalibration(format!(
            "calibration session is labeled {}, expected noise",
            session.label
        )));
    }
    if session.series.is_empty() {
        return Err(Error::InsufficientCalibration(
            "session has no detectors".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Method1Model {
    pub detectors: Vec<DetectorId>,
    /// Mean noise window std per detector, in `detectors` order.
    pub sigma_bar: Vec<f64>,
    pub f: f64,
}

pub fn calibrate_method1(noise_windows: &[WindowSet], f: f64) -> Result<Method1Model> {
    if !(f > 1.0) {
        return Err(Error::invalid(format!(
            "threshold factor f must exceed 1, got {f}"
        )));
    }
    if noise_windows.len() < MIN_CALIBRATION_WINDOWS {
        return Err(Error::InsufficientCalibration(format!(
            "{} noise windows, need at least {MIN_CALIBRATION_WINDOWS}",
            noise_windows.len()
        )));
    }
    require_noise_windows(noise_windows)?;
    let mut detectors = noise_windows[0].detector_ids();
    detectors.sort_unstable();

    let mut sums = vec![0.0; detectors.len()];
    for ws in noise_windows {
        for (sum, w) in sums.iter_mut().zip(ws.select(&detectors)?) {
            *sum += window_stats(w)?.std;
        }
    }
    let sigma_bar: Vec<f64> = sums
        .iter()
        .map(|s| s / noise_windows.len() as f64)
        .collect();
    if let Some(i) = sigma_bar.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::InsufficientCalibration(format!(
            "detector {} has zero noise deviation",
            detectors[i]
        )));
    }
    Ok(Method1Model {
        detectors,
        sigma_bar,
        f,
    })
}

impl Method1Model {
    pub fn detect(&self, ws: &WindowSet) -> Result<PresenceDecision> {
        let windows = ws.select(&self.detectors)?;
        let mut votes = Vec::with_capacity(windows.len());
        for (w, sigma) in windows.iter().zip(&self.sigma_bar) {
            let std = window_stats(w)?.std;
            votes.push(u8::from(std > self.f * sigma));
        }
        let yes = votes.iter().filter(|&&v| v == 1).count();
        // Strict majority, ties (even detector count) resolve to presence.
        let label = u8::from(2 * yes >= votes.len());
        Ok(PresenceDecision {
            label,
            score: yes as f64 / votes.len() as f64,
            per_detector_votes: votes,
        })
    }
}

pub fn detect_method1(model: &Method1Model, ws: &WindowSet) -> Result<PresenceDecision> {
    model.detect(ws)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Method2aModel {
    pub detectors: Vec<DetectorId>,
    /// Full-period noise std per detector.
    pub detector_stds: Vec<f64>,
    pub correlated_noise_dev: f64,
    pub factor: f64,
}

pub fn calibrate_method2a(noise_session: &Session, factor: f64) -> Result<Method2aModel> {
    if !(factor > 0.0) {
        return Err(Error::invalid(format!(
            "factor must be positive, got {factor}"
        )));
    }
    require_noise_session(noise_session)?;
    let detectors = noise_session.detector_ids();
    let mut detector_stds = Vec::with_capacity(detectors.len());
    for s in &noise_session.series {
        let std = sample_std(&s.values);
        if !(std > 0.0) {
            return Err(Error::InsufficientCalibration(format!(
                "detector {} has zero noise deviation",
                s.detector_id
            )));
        }
        detector_stds.push(std);
    }
    Ok(Method2aModel {
        correlated_noise_dev: detector_stds.iter().product(),
        detectors,
        detector_stds,
        factor,
    })
}

impl Method2aModel {
    pub fn threshold(&self) -> f64 {
        self.factor * self.correlated_noise_dev
    }

    pub fn detect(&self, ws: &WindowSet) -> Result<PresenceDecision> {
        let mut score = 1.0;
        for w in ws.select(&self.detectors)? {
            score *= window_stats(w)?.std;
        }
        Ok(PresenceDecision {
            label: u8::from(score >= self.threshold()),
            per_detector_votes: Vec::new(),
            score,
        })
    }
}

pub fn detect_method2a(model: &Method2aModel, ws: &WindowSet) -> Result<PresenceDecision> {
    model.detect(ws)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Method2bModel {
    pub detectors: Vec<DetectorId>,
    pub rate: f64,
    pub sigma_product_series: f64,
    pub factor: f64,
}

/// Element-wise product across equally long sample vectors.
pub fn product_series(columns: &[&[f64]]) -> Result<Vec<f64>> {
    let n = columns.first().map_or(0, |c| c.len());
    if let Some(c) = columns.iter().find(|c| c.len() != n) {
        return Err(Error::AlignmentRequired(format!(
            "sample counts differ ({} vs {n})",
            c.len()
        )));
    }
    Ok((0..n)
        .map(|i| columns.iter().map(|c| c[i]).product())
        .collect())
}

fn same_rate(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

pub fn calibrate_method2b(
    noise_session: &Session,
    rate: f64,
    factor: f64,
) -> Result<Method2bModel> {
    if !(factor > 0.0) {
        return Err(Error::invalid(format!(
            "factor must be positive, got {factor}"
        )));
    }
    require_noise_session(noise_session)?;
    if !noise_session.is_aligned() {
        return Err(Error::AlignmentRequired(
            "calibration series do not share a time grid".into(),
        ));
    }
    if let Some(s) = noise_session
        .series
        .iter()
        .find(|s| !same_rate(s.nominal_rate, rate))
    {
        return Err(Error::AlignmentRequired(format!(
            "detector {} is sampled at {}/s, expected {rate}/s",
            s.detector_id, s.nominal_rate
        )));
    }
    let columns: Vec<&[f64]> = noise_session
        .series
        .iter()
        .map(|s| s.values.as_slice())
        .collect();
    let sigma = sample_std(&product_series(&columns)?);
    if !(sigma > 0.0) {
        return Err(Error::InsufficientCalibration(
            "product series has zero deviation".into(),
        ));
    }
    Ok(Method2bModel {
        detectors: noise_session.detector_ids(),
        rate,
        sigma_product_series: sigma,
        factor,
    })
}

impl Method2bModel {
    pub fn threshold(&self) -> f64 {
        self.factor * self.sigma_product_series
    }

    pub fn detect(&self, ws: &WindowSet) -> Result<PresenceDecision> {
        let windows = ws.select(&self.detectors)?;
        for w in &windows {
            w.ensure_accepted()?;
            if !same_rate(w.nominal_rate, self.rate) {
                return Err(Error::AlignmentRequired(format!(
                    "detector {} window sampled at {}/s, model expects {}/s",
                    w.detector_id, w.nominal_rate, self.rate
                )));
            }
        }
        let columns: Vec<&[f64]> = windows.iter().map(|w| w.values.as_slice()).collect();
        let score = sample_std(&product_series(&columns)?);
        Ok(PresenceDecision {
            label: u8::from(score >= self.threshold()),
            per_detector_votes: Vec::new(),
            score,
        })
    }
}

pub fn detect_method2b(model: &Method2bModel, ws: &WindowSet) -> Result<PresenceDecision> {
    model.detect(ws)
}
