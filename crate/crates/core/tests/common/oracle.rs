//! Straightforward reference implementations used to check the optimized ones.

#![allow(dead_code)]

pub fn two_pass_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// `|X_k|^2 / N` of the mean-removed signal by the O(N^2) definition.
pub fn naive_power(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    (0..n)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, x) in v.iter().enumerate() {
                let phase = -2.0 * std::f64::consts::PI * (k * j % n) as f64 / n as f64;
                re += (x - mean) * phase.cos();
                im += (x - mean) * phase.sin();
            }
            (re * re + im * im) / n as f64
        })
        .collect()
}

/// The `k` nearest rows by full sort on `(squared distance, index)`.
pub fn brute_nearest(points: &[Vec<f64>], z: &[f64], k: usize) -> Vec<(f64, usize)> {
    let mut all: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (p.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum(), i))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.truncate(k);
    all
}

pub fn c_factor(n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let h: f64 = (1..n).map(|i| 1.0 / i as f64).sum();
    2.0 * h - 2.0 * (n - 1) as f64 / n as f64
}

/// Exact expected isolation depth of `x` over the random split process:
/// a uniform feature among those varying on the node, a uniform threshold in
/// `[min, max)`, values `<=` threshold to the left. Integrates over every
/// threshold interval between consecutive distinct values.
pub fn expected_path(
    points: &[Vec<f64>],
    x: &[f64],
    depth: usize,
    limit: usize,
    leaf_correction: bool,
) -> f64 {
    let leaf = depth as f64
        + if leaf_correction {
            c_factor(points.len())
        } else {
            0.0
        };
    if depth >= limit || points.len() <= 1 {
        return leaf;
    }
    let varying: Vec<usize> = (0..x.len())
        .filter(|&f| points.iter().any(|p| p[f] != points[0][f]))
        .collect();
    if varying.is_empty() {
        return leaf;
    }
    let mut total = 0.0;
    for &f in &varying {
        let mut vals: Vec<f64> = points.iter().map(|p| p[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        let span = vals[vals.len() - 1] - vals[0];
        for w in vals.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (left, right): (Vec<Vec<f64>>, Vec<Vec<f64>>) =
                points.iter().cloned().partition(|p| p[f] <= a);
            // Fraction of thresholds in [a, b) that send x left.
            let p_left = if x[f] <= a {
                1.0
            } else if x[f] >= b {
                0.0
            } else {
                (b - x[f]) / (b - a)
            };
            let mut e = 0.0;
            if p_left > 0.0 {
                e += p_left * expected_path(&left, x, depth + 1, limit, leaf_correction);
            }
            if p_left < 1.0 {
                e += (1.0 - p_left) * expected_path(&right, x, depth + 1, limit, leaf_correction);
            }
            total += (b - a) / span * e;
        }
    }
    total / varying.len() as f64
}

/// Best Gini split of one feature by trying every midpoint; ties keep the
/// lower threshold. Returns `(threshold, weighted impurity)`.
pub fn best_gini_split(x: &[f64], y: &[u32]) -> Option<(f64, f64)> {
    let mut vals: Vec<f64> = x.to_vec();
    vals.sort_by(f64::total_cmp);
    vals.dedup();
    let gini = |labels: &[u32]| {
        let n = labels.len() as f64;
        let mut classes: Vec<u32> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        1.0 - classes
            .iter()
            .map(|c| (labels.iter().filter(|l| *l == c).count() as f64 / n).powi(2))
            .sum::<f64>()
    };
    let mut best: Option<(f64, f64)> = None;
    for w in vals.windows(2) {
        let t = 0.5 * (w[0] + w[1]);
        let l: Vec<u32> = x
            .iter()
            .zip(y)
            .filter(|(v, _)| **v <= t)
            .map(|(_, c)| *c)
            .collect();
        let r: Vec<u32> = x
            .iter()
            .zip(y)
            .filter(|(v, _)| **v > t)
            .map(|(_, c)| *c)
            .collect();
        let n = y.len() as f64;
        let imp = l.len() as f64 / n * gini(&l) + r.len() as f64 / n * gini(&r);
        if best.is_none_or(|(_, b)| imp < b - 1e-12) {
            best = Some((t, imp));
        }
    }
    best
}
