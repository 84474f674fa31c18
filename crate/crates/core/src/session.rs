//! Recorded sessions, time windows and the shared time base.
//!
//! Timestamps are seconds since the session start. A [`Session`] holds one
//! [`DetectorSeries`] per detector, sorted by detector id, and is split into
//! synchronized [`WindowSet`]s of `tau` seconds for every downstream decision.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type DetectorId = u16;

/// Tolerance used when snapping timestamps and durations onto window or grid
/// boundaries.
const GRID_EPS: f64 = 1e-9;

/// A window holding fewer than this fraction of its expected samples is rejected.
pub const MIN_WINDOW_FILL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RssiRecord {
    #[serde(rename = "timestamp_s")]
    pub timestamp: f64,
    pub detector_id: DetectorId,
    #[serde(rename = "rssi_dbm")]
    pub rssi: f64,
}

impl RssiRecord {
    pub fn new(timestamp: f64, detector_id: DetectorId, rssi: f64) -> Self {
        Self {
            timestamp,
            detector_id,
            rssi,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.timestamp.is_finite() || self.timestamp < 0.0 {
            return Err(Error::malformed(format!(
                "timestamp {} is not a finite non-negative number",
                self.timestamp
            )));
        }
        if !self.rssi.is_finite() {
            return Err(Error::malformed(format!(
                "rssi {} on detector {} is not finite",
                self.rssi, self.detector_id
            )));
        }
        Ok(())
    }
}

/// Ground-truth annotation of a session: `0` is noise, `n >= 1` people.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u32", from = "u32")]
pub enum Label {
    Noise,
    Persons(u32),
}

impl Label {
    pub fn from_count(count: u32) -> Self {
        if count == 0 {
            Label::Noise
        } else {
            Label::Persons(count)
        }
    }

    pub fn count(self) -> u32 {
        match self {
            Label::Noise => 0,
            Label::Persons(n) => n,
        }
    }

    /// Binary presence label: 0 for noise, 1 otherwise.
    pub fn presence(self) -> u8 {
        u8::from(self != Label::Noise)
    }

    pub fn is_noise(self) -> bool {
        self == Label::Noise
    }
}

impl From<Label> for u32 {
    fn from(l: Label) -> u32 {
        l.count()
    }
}

impl From<u32> for Label {
    fn from(n: u32) -> Self {
        Label::from_count(n)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Noise => f.write_str("noise"),
            Label::Persons(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("noise") {
            return Ok(Label::Noise);
        }
        s.parse::<u32>().map(Label::from_count).map_err(|_| {
            Error::invalid(format!("label `{s}` is neither `noise` nor a person count"))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSeries {
    pub detector_id: DetectorId,
    pub timestamps: Vec<f64>,
    pub values: Vec<f64>,
    pub nominal_rate: f64,
}

impl DetectorSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.timestamps
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    /// Index of the sample whose timestamp is closest to `t`; earlier sample
    /// wins on an exact tie.
    fn nearest_index(&self, t: f64) -> usize {
        let ts = &self.timestamps;
        let right = ts.partition_point(|&x| x < t);
        if right == 0 {
            return 0;
        }
        if right == ts.len() {
            return ts.len() - 1;
        }
        if t - ts[right - 1] <= ts[right] - t {
            right - 1
        } else {
            right
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub series: Vec<DetectorSeries>,
    pub label: Label,
    pub duration: f64,
    pub metadata: String,
}

impl Session {
    pub fn detector_ids(&self) -> Vec<DetectorId> {
        self.series.iter().map(|s| s.detector_id).collect()
    }

    pub fn series(&self, id: DetectorId) -> Option<&DetectorSeries> {
        self.series.iter().find(|s| s.detector_id == id)
    }

    pub fn min_nominal_rate(&self) -> f64 {
        self.series
            .iter()
            .map(|s| s.nominal_rate)
            .fold(f64::INFINITY, f64::min)
    }

    /// True when every series shares one identical timestamp vector.
    pub fn is_aligned(&self) -> bool {
        match self.series.split_first() {
            None => true,
            Some((first, rest)) => rest.iter().all(|s| s.timestamps == first.timestamps),
        }
    }

    /// Keeps only the listed detectors, in detector-id order.
    pub fn restrict(&self, detectors: &[DetectorId]) -> Result<Session> {
        let mut series = Vec::with_capacity(detectors.len());
        for &id in detectors {
            let s = self
                .series(id)
                .ok_or_else(|| Error::DetectorMismatch(format!("session has no detector {id}")))?;
            series.push(s.clone());
        }
        series.sort_by_key(|s| s.detector_id);
        series.dedup_by_key(|s| s.detector_id);
        Ok(Session {
            series,
            label: self.label,
            duration: self.duration,
            metadata: self.metadata.clone(),
        })
    }

    /// All records of the session, time-major then detector order.
    pub fn records(&self) -> Vec<RssiRecord> {
        let mut out: Vec<RssiRecord> = self
            .series
            .iter()
            .flat_map(|s| {
                s.samples()
                    .map(move |(t, v)| RssiRecord::new(t, s.detector_id, v))
            })
            .collect();
        out.sort_by(|a, b| {
            a.timestamp
                .total_cmp(&b.timestamp)
                .then(a.detector_id.cmp(&b.detector_id))
        });
        out
    }
}

/// One detector's samples inside a single `[start, start + length)` interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub detector_id: DetectorId,
    pub values: Vec<f64>,
    pub start: f64,
    pub length: f64,
    pub nominal_rate: f64,
}

impl Window {
    pub fn expected_len(&self) -> usize {
        (self.nominal_rate * self.length + GRID_EPS).round() as usize
    }

    /// Rejects windows holding fewer than half of their expected samples.
    pub fn ensure_accepted(&self) -> Result<()> {
        let expected = self.expected_len();
        if self.values.is_empty() || (self.values.len() as f64) < MIN_WINDOW_FILL * expected as f64
        {
            return Err(Error::UnderfilledWindow {
                detector: self.detector_id,
                actual: self.values.len(),
                expected,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSet {
    pub windows: Vec<Window>,
    pub label: Option<Label>,
    pub start: f64,
    pub length: f64,
}

impl WindowSet {
    pub fn window(&self, id: DetectorId) -> Option<&Window> {
        self.windows.iter().find(|w| w.detector_id == id)
    }

    pub fn detector_ids(&self) -> Vec<DetectorId> {
        self.windows.iter().map(|w| w.detector_id).collect()
    }

    /// Looks up the windows for `ids`, in the given order.
    pub fn select(&self, ids: &[DetectorId]) -> Result<Vec<&Window>> {
        ids.iter()
            .map(|&id| {
                self.window(id).ok_or_else(|| {
                    Error::DetectorMismatch(format!("window set has no detector {id}"))
                })
            })
            .collect()
    }
}

/// Groups records into per-detector series.
///
/// Records are stable-sorted by timestamp within each detector; of several
/// records sharing one timestamp the last in input order is kept.
pub fn assemble_session(records: &[RssiRecord], duration: f64, label: Label) -> Result<Session> {
    if records.is_empty() {
        return Err(Error::EmptySession);
    }
    if !duration.is_finite() || duration <= 0.0 {
        return Err(Error::malformed(format!(
            "session duration {duration} must be positive"
        )));
    }
    let mut grouped: BTreeMap<DetectorId, Vec<(f64, f64)>> = BTreeMap::new();
    for r in records {
        r.validate()?;
        grouped
            .entry(r.detector_id)
            .or_default()
            .push((r.timestamp, r.rssi));
    }

    let series = grouped
        .into_iter()
        .map(|(detector_id, mut samples)| {
            samples.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut deduped: Vec<(f64, f64)> = Vec::with_capacity(samples.len());
            for s in samples {
                match deduped.last_mut() {
                    Some(last) if last.0 == s.0 => *last = s,
                    _ => deduped.push(s),
                }
            }
            let (timestamps, values): (Vec<f64>, Vec<f64>) = deduped.into_iter().unzip();
            let nominal_rate = estimate_rate(&timestamps, duration);
            DetectorSeries {
                detector_id,
                timestamps,
                values,
                nominal_rate,
            }
        })
        .collect();

    Ok(Session {
        series,
        label,
        duration,
        metadata: String::new(),
    })
}

fn estimate_rate(timestamps: &[f64], duration: f64) -> f64 {
    let n = timestamps.len();
    let span =
        timestamps.last().copied().unwrap_or(0.0) - timestamps.first().copied().unwrap_or(0.0);
    if n >= 2 && span > 0.0 {
        (n - 1) as f64 / span
    } else {
        n as f64 / duration
    }
}

/// Number of complete windows of `tau` seconds in `duration`.
pub fn window_count(duration: f64, tau: f64) -> usize {
    (duration / tau + GRID_EPS).floor() as usize
}

/// Splits a session into `floor(duration / tau)` synchronized window sets;
/// the trailing partial window is dropped.
pub fn split_windows(session: &Session, tau: f64) -> Result<Vec<WindowSet>> {
    if !tau.is_finite() || tau <= 0.0 {
        return Err(Error::invalid(format!("tau must be positive, got {tau}")));
    }
    let count = window_count(session.duration, tau);
    if count == 0 {
        return Err(Error::NoCompleteWindow {
            duration: session.duration,
            tau,
        });
    }

    // Boundary index per series: sample j belongs to window floor(t_j / tau).
    let bounds: Vec<Vec<usize>> = session
        .series
        .iter()
        .map(|s| {
            (0..=count)
                .map(|i| {
                    s.timestamps
                        .partition_point(|&t| t / tau + GRID_EPS < i as f64)
                })
                .collect()
        })
        .collect();

    Ok((0..count)
        .map(|i| {
            let start = i as f64 * tau;
            let windows = session
                .series
                .iter()
                .zip(&bounds)
                .map(|(s, b)| Window {
                    detector_id: s.detector_id,
                    values: s.values[b[i]..b[i + 1]].to_vec(),
                    start,
                    length: tau,
                    nominal_rate: s.nominal_rate,
                })
                .collect();
            WindowSet {
                windows,
                label: Some(session.label),
                start,
                length: tau,
            }
        })
        .collect())
}

/// Resamples every detector onto the grid `i / rate`, `i < floor(duration * rate)`,
/// by nearest-neighbor selection.
pub fn align_series(session: &Session, rate: f64) -> Result<Session> {
    if !rate.is_finite() || rate <= 0.0 {
        return Err(Error::invalid(format!("rate must be positive, got {rate}")));
    }
    for s in &session.series {
        if rate > s.nominal_rate * (1.0 + 1e-6) {
            return Err(Error::RateTooHigh {
                detector: s.detector_id,
                requested: rate,
                nominal: s.nominal_rate,
            });
        }
    }
    let n = (session.duration * rate + GRID_EPS).floor() as usize;
    let grid: Vec<f64> = (0..n).map(|i| i as f64 / rate).collect();
    let series = session
        .series
        .iter()
        .map(|s| DetectorSeries {
            detector_id: s.detector_id,
            timestamps: grid.clone(),
            values: grid.iter().map(|&t| s.values[s.nearest_index(t)]).collect(),
            nominal_rate: rate,
        })
        .collect();
    Ok(Session {
        series,
        label: session.label,
        duration: session.duration,
        metadata: session.metadata.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_records(detectors: &[DetectorId], rate: f64, duration: f64) -> Vec<RssiRecord> {
        let n = (duration * rate).round() as usize;
        let mut out = Vec::new();
        for i in 0..n {
            for &d in detectors {
                out.push(RssiRecord::new(
                    i as f64 / rate,
                    d,
                    -40.0 - (i % 7) as f64 * 0.1 - d as f64,
                ));
            }
        }
        out
    }

    #[test]
    fn assembles_two_detectors() {
        let recs = uniform_records(&[1, 2], 20.0, 20.0);
        assert_eq!(recs.len(), 800);
        let s = assemble_session(&recs, 20.0, Label::Noise).unwrap();
        assert_eq!(s.series.len(), 2);
        for series in &s.series {
            assert_eq!(series.len(), 400);
            assert!((series.nominal_rate - 20.0).abs() < 1e-9);
        }
    }

    #[test]
    fn duplicate_timestamp_keeps_last() {
        let mut recs = vec![
            RssiRecord::new(0.0, 1, -40.0),
            RssiRecord::new(0.05, 1, -41.0),
            RssiRecord::new(0.1, 1, -42.0),
        ];
        recs.push(RssiRecord::new(0.05, 1, -99.0));
        let s = assemble_session(&recs, 1.0, Label::Noise).unwrap();
        assert_eq!(s.series[0].values, vec![-40.0, -99.0, -42.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            assemble_session(&[], 1.0, Label::Noise),
            Err(Error::EmptySession)
        );
        let bad = [RssiRecord::new(0.0, 1, f64::NAN)];
        assert!(matches!(
            assemble_session(&bad, 1.0, Label::Noise),
            Err(Error::MalformedRecord { .. })
        ));
        let bad = [RssiRecord::new(-1.0, 1, -40.0)];
        assert!(matches!(
            assemble_session(&bad, 1.0, Label::Noise),
            Err(Error::MalformedRecord { .. })
        ));
    }

    #[test]
    fn window_counts() {
        let recs = uniform_records(&[1], 2.0, 1200.0);
        let s = assemble_session(&recs, 1200.0, Label::Persons(1)).unwrap();
        let w = split_windows(&s, 20.0).unwrap();
        assert_eq!(w.len(), 60);
        assert!(w.iter().all(|ws| ws.label == Some(Label::Persons(1))));
        assert!(w.iter().all(|ws| ws.windows[0].values.len() == 40));
        assert_eq!(split_windows(&s, 7.0).unwrap().len(), 171);

        let short =
            assemble_session(&uniform_records(&[1], 20.0, 10.0), 10.0, Label::Noise).unwrap();
        assert!(matches!(
            split_windows(&short, 20.0),
            Err(Error::NoCompleteWindow { .. })
        ));
    }

    #[test]
    fn align_identity_and_mixed_rates() {
        let recs = uniform_records(&[1, 2], 20.0, 10.0);
        let s = assemble_session(&recs, 10.0, Label::Noise).unwrap();
        let a = align_series(&s, 20.0).unwrap();
        for (x, y) in s.series.iter().zip(&a.series) {
            assert_eq!(x.values, y.values);
        }

        let mut recs = uniform_records(&[1], 20.0, 10.0);
        recs.extend(uniform_records(&[2], 25.0, 10.0));
        let s = assemble_session(&recs, 10.0, Label::Noise).unwrap();
        let a = align_series(&s, 20.0).unwrap();
        assert!(a.is_aligned());
        assert!(a.series.iter().all(|x| x.len() == 200));

        assert!(matches!(
            align_series(&s, 30.0),
            Err(Error::RateTooHigh { .. })
        ));
    }

    #[test]
    fn underfilled_window_rejected() {
        let w = Window {
            detector_id: 1,
            values: vec![-40.0; 199],
            start: 0.0,
            length: 20.0,
            nominal_rate: 20.0,
        };
        assert!(matches!(
            w.ensure_accepted(),
            Err(Error::UnderfilledWindow { .. })
        ));
        let w = Window {
            values: vec![-40.0; 200],
            ..w
        };
        assert!(w.ensure_accepted().is_ok());
    }

    #[test]
    fn label_parsing() {
        assert_eq!("noise".parse::<Label>().unwrap(), Label::Noise);
        assert_eq!("0".parse::<Label>().unwrap(), Label::Noise);
        assert_eq!("7".parse::<Label>().unwrap(), Label::Persons(7));
        assert!("x".parse::<Label>().is_err());
    }
}
