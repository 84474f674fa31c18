mod common;

use common::{dataset, window_set};
use proptest::prelude::*;
use rssi_occupancy::counting::{assign_folds, fit_forest, fit_knn, fit_tree, ForestParams};
use rssi_occupancy::features::{feature_vector, stats_of, FeatureConfig, STAT_NAMES};
use rssi_occupancy::presence::iforest::{anomaly_score, fit_vectors};
use rssi_occupancy::presence::{
    calibrate_method1, IsolationForestParams, Method1Model, Method2aModel,
};
use rssi_occupancy::session::{Label, RssiRecord};
use rssi_occupancy::{align_series, assemble_session, split_windows, Error, Session};

fn grid_session(detectors: u16, rate: u32, seconds: u32, seed: u64) -> Session {
    let mut records = Vec::new();
    let mut state = seed | 1;
    for i in 0..rate * seconds {
        for d in 1..=detectors {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let v = -50.0 + (state % 1000) as f64 / 250.0;
            records.push(RssiRecord::new(i as f64 / rate as f64, d, v));
        }
    }
    assemble_session(&records, seconds as f64, Label::Noise).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn window_count_is_floor(d_tenths in 1u32..3000, t_tenths in 1u32..400) {
        let mut s = grid_session(1, 4, 2, 1);
        s.duration = d_tenths as f64 / 10.0;
        let tau = t_tenths as f64 / 10.0;
        let expected = (d_tenths / t_tenths) as usize;
        match split_windows(&s, tau) {
            Ok(w) => prop_assert_eq!(w.len(), expected),
            Err(Error::NoCompleteWindow { .. }) => prop_assert_eq!(expected, 0),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn windows_concatenate_to_leading_span(
        rate in 1u32..30, seconds in 2u32..60, tau in 1u32..20, seed in any::<u64>()
    ) {
        prop_assume!(tau <= seconds);
        let s = grid_session(2, rate, seconds, seed);
        let ws = split_windows(&s, tau as f64).unwrap();
        let n = (seconds / tau) as usize;
        let kept = (n as u32 * tau * rate) as usize;
        for (k, series) in s.series.iter().enumerate() {
            let joined: Vec<f64> = ws.iter().flat_map(|w| w.windows[k].values.clone()).collect();
            prop_assert_eq!(&joined[..], &series.values[..kept]);
        }
    }

    #[test]
    fn align_is_idempotent(rate in 2u32..25, seconds in 1u32..30, seed in any::<u64>(), factor in 1u32..4) {
        let s = grid_session(3, rate * factor, seconds, seed);
        let once = align_series(&s, rate as f64).unwrap();
        let twice = align_series(&once, rate as f64).unwrap();
        prop_assert!(once.is_aligned());
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn feature_affine_shift(values in prop::collection::vec(-80.0f64..-20.0, 40..200), c in -30.0f64..30.0) {
        let shifted: Vec<f64> = values.iter().map(|v| v + c).collect();
        let cfg = FeatureConfig::new(&[1], 8).unwrap();
        let a = feature_vector(&window_set(&[(1, values)], 20.0, None), &cfg).unwrap();
        let b = feature_vector(&window_set(&[(1, shifted)], 20.0, None), &cfg).unwrap();
        for (i, name) in a.layout.0.iter().enumerate() {
            let moves = ["mean", "min", "max", "median"].contains(&name.name.as_str());
            let want = if moves { a.values[i] + c } else { a.values[i] };
            let scale = want.abs().max(1.0);
            prop_assert!((b.values[i] - want).abs() <= 1e-9 * scale, "{} {} {}", name.name, b.values[i], want);
        }
    }

    #[test]
    fn feature_scaling(values in prop::collection::vec(-5.0f64..5.0, 10..200), a in 0.01f64..50.0) {
        let scaled: Vec<f64> = values.iter().map(|v| v * a).collect();
        let s0 = stats_of(&values);
        let s1 = stats_of(&scaled);
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1e-12);
        prop_assert!(close(s1.std, a * s0.std));
        prop_assert!(close(s1.iqr, a * s0.iqr));
        prop_assert!(close(s1.abs_sum_changes, a * s0.abs_sum_changes));
        if s0.std > 1e-6 {
            prop_assert!((s1.skewness - s0.skewness).abs() <= 1e-8);
            prop_assert!((s1.kurtosis - s0.kurtosis).abs() <= 1e-8);
        }
    }

    #[test]
    fn stats_and_spectrum_ranges(values in prop::collection::vec(-90.0f64..-10.0, 16..300)) {
        let s = stats_of(&values);
        prop_assert!(s.std >= 0.0 && s.iqr >= 0.0);
        prop_assert!(s.min <= s.median && s.median <= s.max);
        let cfg = FeatureConfig::new(&[1], 8).unwrap();
        let fv = feature_vector(&window_set(&[(1, values)], 20.0, None), &cfg).unwrap();
        let n = STAT_NAMES.len();
        prop_assert!(fv.values[n..n + 8].iter().all(|&e| e >= 0.0));
        let centroid = fv.values[n + 8];
        prop_assert!((0.0..=10.0 + 1e-9).contains(&centroid));
    }

    #[test]
    fn constant_window_moments(c in -90.0f64..-10.0, n in 2usize..100) {
        let s = stats_of(&vec![c; n]);
        prop_assert_eq!(s.std, 0.0);
        prop_assert_eq!(s.skewness, 0.0);
        prop_assert_eq!(s.kurtosis, 0.0);
        prop_assert_eq!(s.abs_sum_changes, 0.0);
    }
}

fn noisy(seed: u64, n: usize, sd: f64) -> Vec<f64> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(-45.0, sd).unwrap();
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

fn method1_model(seed: u64) -> Method1Model {
    let cal: Vec<_> = (0..12)
        .map(|i| {
            window_set(
                &[
                    (1, noisy(seed + i, 400, 0.4)),
                    (2, noisy(seed + 100 + i, 400, 0.5)),
                    (3, noisy(seed + 200 + i, 400, 0.45)),
                ],
                20.0,
                Some(Label::Noise),
            )
        })
        .collect();
    calibrate_method1(&cal, 2.2).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn method1_shift_and_order_invariant(
        seed in 0u64..1000, sds in prop::array::uniform3(0.1f64..2.0), shifts in prop::array::uniform3(-20.0f64..20.0)
    ) {
        let model = method1_model(seed);
        let cols: Vec<(u16, Vec<f64>)> = (0..3).map(|k| (k as u16 + 1, noisy(seed * 7 + k, 400, sds[k as usize]))).collect();
        let base = model.detect(&window_set(&cols, 20.0, None)).unwrap();
        let moved: Vec<(u16, Vec<f64>)> = cols
            .iter()
            .zip(shifts)
            .map(|((id, v), c)| (*id, v.iter().map(|x| x + c).collect()))
            .collect();
        let mut reversed = moved.clone();
        reversed.reverse();
        for variant in [moved, reversed] {
            let d = model.detect(&window_set(&variant, 20.0, None)).unwrap();
            prop_assert_eq!(d.label, base.label);
            prop_assert_eq!(&d.per_detector_votes, &base.per_detector_votes);
        }
    }

    #[test]
    fn method2a_score_is_multiplicative(seed in 0u64..1000, a in 0.05f64..20.0, which in 0usize..3) {
        let model = Method2aModel { detectors: vec![1, 2, 3], detector_stds: vec![0.4, 0.4, 0.4], correlated_noise_dev: 0.064, factor: 3.0 };
        let mut cols: Vec<(u16, Vec<f64>)> = (0..3).map(|k| (k as u16 + 1, noisy(seed + k, 300, 0.6))).collect();
        let before = model.detect(&window_set(&cols, 20.0, None)).unwrap().score;
        cols[which].1 = cols[which].1.iter().map(|x| x * a).collect();
        let after = model.detect(&window_set(&cols, 20.0, None)).unwrap().score;
        prop_assert!((after - a * before).abs() <= 1e-9 * after.abs().max(1e-300));
    }

    #[test]
    fn larger_deviation_never_clears_presence(seed in 0u64..1000, sd in 0.1f64..2.0, gain in 1.0f64..4.0) {
        let m1 = method1_model(seed);
        let m2a = Method2aModel { detectors: vec![1, 2, 3], detector_stds: vec![0.45; 3], correlated_noise_dev: 0.45f64.powi(3), factor: 3.0 };
        let cols: Vec<(u16, Vec<f64>)> = (0..3).map(|k| (k as u16 + 1, noisy(seed * 3 + k, 400, sd))).collect();
        let widened: Vec<(u16, Vec<f64>)> = cols
            .iter()
            .map(|(id, v)| {
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                (*id, v.iter().map(|x| mean + gain * (x - mean)).collect())
            })
            .collect();
        let (a, b) = (window_set(&cols, 20.0, None), window_set(&widened, 20.0, None));
        if m1.detect(&a).unwrap().label == 1 {
            prop_assert_eq!(m1.detect(&b).unwrap().label, 1);
        }
        if m2a.detect(&a).unwrap().label == 1 {
            prop_assert_eq!(m2a.detect(&b).unwrap().label, 1);
        }
    }

    #[test]
    fn isolation_scores_in_unit_interval(
        points in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 4..60),
        probe in prop::collection::vec(-100.0f64..100.0, 3),
        seed in any::<u64>()
    ) {
        let params = IsolationForestParams { trees: 20, seed, ..Default::default() };
        let (trees, psi) = fit_vectors(&points, &params).unwrap();
        for x in points.iter().chain(std::iter::once(&probe)) {
            let s = anomaly_score(&trees, psi, x);
            prop_assert!(s > 0.0 && s < 1.0, "score {}", s);
        }
    }
}

fn labeled_points(seed: u64, n: usize, dims: usize) -> (Vec<Vec<f64>>, Vec<u32>) {
    let raw = noisy(seed, n * dims, 3.0);
    let vectors: Vec<Vec<f64>> = raw.chunks(dims).map(|c| c.to_vec()).collect();
    let labels = vectors
        .iter()
        .map(|v| if v[0] + 0.5 * v[1 % dims] > -67.5 { 3 } else { 1 } + u32::from(v[dims - 1] > -45.0) * 4)
        .collect();
    (vectors, labels)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn knn_affine_invariant(
        seed in 0u64..10_000, k in 1usize..8,
        affine in prop::collection::vec((prop_oneof![0.001f64..1000.0, -1000.0f64..-0.001], -100.0f64..100.0), 4)
    ) {
        let (x, y) = labeled_points(seed, 60, 4);
        let t = |v: &Vec<f64>| v.iter().zip(&affine).map(|(a, (s, b))| s * a + b).collect::<Vec<f64>>();
        let m0 = fit_knn(&dataset(x.clone(), y.clone()), k).unwrap();
        let m1 = fit_knn(&dataset(x.iter().map(t).collect(), y), k).unwrap();
        let (q, _) = labeled_points(seed + 1, 30, 4);
        for v in &q {
            prop_assert_eq!(m0.predict(v), m1.predict(&t(v)));
        }
    }

    #[test]
    fn trees_invariant_under_monotone_transforms(seed in 0u64..10_000, fseed in any::<u64>()) {
        let (x, y) = labeled_points(seed, 40, 3);
        // Strictly increasing per-feature maps.
        let t = |v: &Vec<f64>| vec![(v[0] / 10.0).exp(), v[1].powi(3) * 0.01 + 7.0, -1.0 / (v[2] - 100.0)];
        let tx: Vec<Vec<f64>> = x.iter().map(t).collect();
        let (d0, d1) = (dataset(x.clone(), y.clone()), dataset(tx.clone(), y));
        let t0 = fit_tree(&d0, None, 1, fseed).unwrap();
        let t1 = fit_tree(&d1, None, 1, fseed).unwrap();
        // Without bootstrap every tree sees every point. Out-of-bag points can
        // sit between two sampled values, and a monotone map moves midpoints.
        let params = ForestParams { trees: 15, bootstrap: false, seed: fseed, ..Default::default() };
        let f0 = fit_forest(&d0, &params).unwrap();
        let f1 = fit_forest(&d1, &params).unwrap();
        for (a, b) in x.iter().zip(&tx) {
            prop_assert_eq!(t0.predict(a), t1.predict(b));
            prop_assert_eq!(f0.predict(a), f1.predict(b));
        }
    }

    #[test]
    fn folds_partition(labels in prop::collection::vec(0u32..6, 3..200), k in 2usize..6, seed in any::<u64>()) {
        prop_assume!(labels.len() >= k);
        let (folds, _) = assign_folds(&labels, k, seed).unwrap();
        prop_assert_eq!(folds.len(), labels.len());
        let mut sizes = vec![0usize; k];
        for &f in &folds {
            prop_assert!(f < k);
            sizes[f] += 1;
        }
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        prop_assert!(hi - lo <= 1, "{:?}", sizes);
    }

    #[test]
    fn randomized_fits_reproducible(seed in 0u64..10_000, fseed in any::<u64>()) {
        let (x, y) = labeled_points(seed, 50, 3);
        let d = dataset(x.clone(), y);
        let params = ForestParams { trees: 10, seed: fseed, ..Default::default() };
        let (a, b) = (fit_forest(&d, &params).unwrap(), fit_forest(&d, &params).unwrap());
        prop_assert_eq!(&a, &b);
        let ip = IsolationForestParams { trees: 10, seed: fseed, ..Default::default() };
        let (ta, _) = fit_vectors(&x, &ip).unwrap();
        let (tb, _) = fit_vectors(&x, &ip).unwrap();
        prop_assert_eq!(ta, tb);
    }
}
