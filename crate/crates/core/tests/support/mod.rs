//! Shared helpers for integration tests.
#![allow(dead_code)]

use ocl_core::dataset::Sample;
use rand::Rng;

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn numeric_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or the absolute difference when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale < 1e-12 {
        norm(&diff)
    } else {
        norm(&diff) / scale
    }
}

pub fn uniform_vec<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Samples whose features are `label + 1` repeated.
pub fn labelled_samples(per_class: usize, classes: usize, dim: usize) -> Vec<Sample> {
    let mut out = Vec::new();
    for i in 0..per_class {
        for c in 0..classes {
            out.push(Sample {
                features: vec![c as f64 + 1.0; dim],
                label: c,
                task_id: 0,
                arrival_index: (i * classes + c) as u64,
            });
        }
    }
    out
}
