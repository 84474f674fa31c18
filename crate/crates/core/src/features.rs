//! Per-window statistics, power spectrum and the fixed feature layout.
//!
//! Every detector contributes 18 features: nine [`WindowStats`] fields, the
//! first eight spectrum bin energies and the spectral centroid.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::{DetectorId, Window, WindowSet};

pub const DEFAULT_BINS: usize = 8;

pub const STAT_NAMES: [&str; 9] = [
    "mean",
    "std",
    "skewness",
    "kurtosis",
    "min",
    "max",
    "median",
    "iqr",
    "abs_sum_changes",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub mean: f64,
    /// Sample (n - 1) standard deviation.
    pub std: f64,
    pub skewness: f64,
    /// Excess kurtosis.
    pub kurtosis: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub iqr: f64,
    pub abs_sum_changes: f64,
}

impl WindowStats {
    pub fn to_array(&self) -> [f64; 9] {
        [
            self.mean,
            self.std,
            self.skewness,
            self.kurtosis,
            self.min,
            self.max,
            self.median,
            self.iqr,
            self.abs_sum_changes,
        ]
    }
}

/// Single-pass accumulator for the first four central moments.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2
            - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sample_std(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).sqrt()
        }
    }

    pub fn skewness(&self) -> f64 {
        if self.m2 <= 0.0 {
            return 0.0;
        }
        (self.n as f64).sqrt() * self.m3 / self.m2.powf(1.5)
    }

    pub fn excess_kurtosis(&self) -> f64 {
        if self.m2 <= 0.0 {
            return 0.0;
        }
        self.n as f64 * self.m4 / (self.m2 * self.m2) - 3.0
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Sample standard deviation of a slice (0 for fewer than two values).
pub fn sample_std(values: &[f64]) -> f64 {
    values.iter().copied().collect::<Moments>().sample_std()
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn window_stats(window: &Window) -> Result<WindowStats> {
    window.ensure_accepted()?;
    Ok(stats_of(&window.values))
}

/// Statistics of a non-empty slice, without the fill check.
pub fn stats_of(values: &[f64]) -> WindowStats {
    debug_assert!(!values.is_empty());
    let moments: Moments = values.iter().copied().collect();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let abs_sum_changes = values.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    WindowStats {
        mean: moments.mean(),
        std: moments.sample_std(),
        skewness: moments.skewness(),
        kurtosis: moments.excess_kurtosis(),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        median: quantile_sorted(&sorted, 0.5),
        iqr: quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25),
        abs_sum_changes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    /// `|X_k|^2 / N` for bins `1..=K` of the mean-removed window.
    pub bin_energies: Vec<f64>,
    pub spectral_centroid: f64,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Full power spectrum `|X_k|^2 / N`, `k = 0..N`, of the mean-removed values.
///
/// The normalization makes the sum over all bins equal the energy of the
/// mean-removed signal.
pub fn power_spectrum(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = values
        .iter()
        .map(|&v| Complex::new(v - mean, 0.0))
        .collect();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n));
    fft.process(&mut buf);
    buf.iter().map(|c| c.norm_sqr() / n as f64).collect()
}

pub fn spectrum(window: &Window, bins: usize) -> Result<SpectrumSummary> {
    let n = window.values.len();
    if bins == 0 || n < 2 * bins {
        return Err(Error::WindowTooShort { len: n, bins });
    }
    let power = power_spectrum(&window.values);
    let half = &power[1..=n / 2];
    let total: f64 = half.iter().sum();
    // Bin k sits at k / length Hz.
    let spectral_centroid = if total > 0.0 {
        half.iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 / window.length * p)
            .sum::<f64>()
            / total
    } else {
        0.0
    };
    Ok(SpectrumSummary {
        bin_energies: power[1..=bins].to_vec(),
        spectral_centroid,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureName {
    pub detector: DetectorId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureLayout(pub Vec<FeatureName>);

impl FeatureLayout {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn features_per_detector(bins: usize) -> usize {
        STAT_NAMES.len() + bins + 1
    }
}

/// Detector subset and spectrum bin count; detectors are kept sorted by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    detectors: Vec<DetectorId>,
    bins: usize,
}

impl FeatureConfig {
    pub fn new(detectors: &[DetectorId], bins: usize) -> Result<Self> {
        if detectors.is_empty() {
            return Err(Error::LayoutMismatch("no detectors selected".into()));
        }
        if bins == 0 {
            return Err(Error::invalid("spectrum bin count must be positive"));
        }
        let mut detectors = detectors.to_vec();
        detectors.sort_unstable();
        detectors.dedup();
        Ok(Self { detectors, bins })
    }

    pub fn detectors(&self) -> &[DetectorId] {
        &self.detectors
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn layout(&self) -> FeatureLayout {
        let mut names = Vec::with_capacity(
            self.detectors.len() * FeatureLayout::features_per_detector(self.bins),
        );
        for &detector in &self.detectors {
            let mut push = |name: String| names.push(FeatureName { detector, name });
            for s in STAT_NAMES {
                push(s.to_string());
            }
            for k in 1..=self.bins {
                push(format!("bin{k}"));
            }
            push("centroid".to_string());
        }
        FeatureLayout(names)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub layout: Arc<FeatureLayout>,
}

impl FeatureVector {
    pub fn ensure_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::MalformedFeature(format!(
                "feature {} ({:?}) is not finite",
                i,
                self.layout.0.get(i)
            ))),
        }
    }
}

/// Builds feature vectors sharing one layout allocation.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    config: FeatureConfig,
    layout: Arc<FeatureLayout>,
}

impl FeatureExtractor {
    pub fn new(config: FeatureConfig) -> Self {
        let layout = Arc::new(config.layout());
        Self { config, layout }
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn layout(&self) -> &Arc<FeatureLayout> {
        &self.layout
    }

    pub fn extract(&self, window_set: &WindowSet) -> Result<FeatureVector> {
        let mut values = Vec::with_capacity(self.layout.len());
        for w in window_set.select(&self.config.detectors)? {
            let stats = window_stats(w)?;
            let spec = spectrum(w, self.config.bins)?;
            values.extend_from_slice(&stats.to_array());
            values.extend_from_slice(&spec.bin_energies);
            values.push(spec.spectral_centroid);
        }
        let fv = FeatureVector {
            values,
            layout: Arc::clone(&self.layout),
        };
        fv.ensure_finite()?;
        Ok(fv)
    }
}

pub fn feature_vector(window_set: &WindowSet, config: &FeatureConfig) -> Result<FeatureVector> {
    FeatureExtractor::new(config.clone()).extract(window_set)
}
