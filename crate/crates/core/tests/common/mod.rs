#![allow(dead_code)]
pub mod oracle;

use rssi_occupancy::session::{DetectorId, Label, Window, WindowSet};
use rssi_occupancy::simulator::{make_reference_scene, simulate, SceneVariant, SimConfig};
use rssi_occupancy::{split_windows, Session};

pub fn simulated(variant: SceneVariant, people: u32, duration: f64, seed: u64) -> Session {
    let scene = make_reference_scene(variant).with_seed(seed);
    simulate(&scene, &SimConfig::new(duration, people)).expect("simulation")
}

pub fn windows_of(variant: SceneVariant, people: u32, duration: f64, seed: u64) -> Vec<WindowSet> {
    split_windows(&simulated(variant, people, duration, seed), 20.0).expect("windows")
}

/// A window set built from explicit per-detector samples at `rate`.
pub fn window_set(
    columns: &[(DetectorId, Vec<f64>)],
    rate: f64,
    label: Option<Label>,
) -> WindowSet {
    let length = columns.first().map_or(1.0, |c| c.1.len() as f64 / rate);
    WindowSet {
        windows: columns
            .iter()
            .map(|(id, values)| Window {
                detector_id: *id,
                values: values.clone(),
                start: 0.0,
                length,
                nominal_rate: rate,
            })
            .collect(),
        label,
        start: 0.0,
        length,
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn plain_layout(dims: usize) -> rssi_occupancy::features::FeatureLayout {
    rssi_occupancy::features::FeatureLayout(
        (0..dims)
            .map(|i| rssi_occupancy::features::FeatureName {
                detector: 1,
                name: format!("x{i}"),
            })
            .collect(),
    )
}

pub fn dataset(
    vectors: Vec<Vec<f64>>,
    labels: Vec<u32>,
) -> rssi_occupancy::counting::LabeledDataset {
    let dims = vectors[0].len();
    rssi_occupancy::counting::LabeledDataset::new(vectors, labels, plain_layout(dims))
        .expect("dataset")
}
