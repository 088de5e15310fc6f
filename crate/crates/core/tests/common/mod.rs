//! Test-only oracles and generators. Nothing here calls into the search or
//! conditioning code paths it is used to check.

#![allow(dead_code)]

use condmode::{Bandwidth, JointKernelModel, Mixture, Point};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

pub fn point(v: &[f64]) -> Point<f64> {
    Point::new(v.to_vec()).unwrap()
}

pub fn bandwidth(v: &[f64]) -> Bandwidth<f64> {
    Bandwidth::new(v.to_vec()).unwrap()
}

pub fn normalize(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

pub fn build_mixture(
    d: usize,
    raw_weights: &[f64],
    centers: &[f64],
    scales: &[f64],
) -> Mixture<f64> {
    Mixture::new(
        normalize(raw_weights),
        centers.chunks(d).map(point).collect(),
        scales.chunks(d).map(bandwidth).collect(),
    )
    .unwrap()
}

/// The two-maximum test mixture: weights 0.45/0.45/0.1, centers (1,1),
/// (-1,-1), (-1.5,1.5), bandwidths 1, 1, 0.5.
pub fn twin_peak_mixture() -> Mixture<f64> {
    Mixture::new(
        vec![0.45, 0.45, 0.1],
        vec![
            point(&[1.0, 1.0]),
            point(&[-1.0, -1.0]),
            point(&[-1.5, 1.5]),
        ],
        vec![
            bandwidth(&[1.0, 1.0]),
            bandwidth(&[1.0, 1.0]),
            bandwidth(&[0.5, 0.5]),
        ],
    )
    .unwrap()
}

pub fn mixture_strategy(
    max_k: usize,
    dims: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = Mixture<f64>> {
    (1..=max_k, dims).prop_flat_map(|(k, d)| {
        (
            prop::collection::vec(0.05f64..1.0, k),
            prop::collection::vec(-3.0f64..3.0, k * d),
            prop::collection::vec(0.2f64..2.0, k * d),
        )
            .prop_map(move |(w, c, s)| build_mixture(d, &w, &c, &s))
    })
}

pub fn joint_model_strategy(
    max_m: usize,
    dx: usize,
    dy: usize,
) -> impl Strategy<Value = JointKernelModel<f64>> {
    (1..=max_m).prop_flat_map(move |m| {
        (
            prop::collection::vec(0.05f64..1.0, m),
            prop::collection::vec(-3.0f64..3.0, m * dx),
            prop::collection::vec(-3.0f64..3.0, m * dy),
            prop::collection::vec(0.1f64..2.0, m * dx),
            prop::collection::vec(0.1f64..2.0, m * dy),
        )
            .prop_map(move |(w, xc, yc, xs, ys)| {
                JointKernelModel::new(
                    normalize(&w),
                    xc.chunks(dx).map(point).collect(),
                    yc.chunks(dy).map(point).collect(),
                    xs.chunks(dx).map(bandwidth).collect(),
                    ys.chunks(dy).map(bandwidth).collect(),
                )
                .unwrap()
            })
    })
}

/// Composite trapezoid rule with `n` panels.
pub fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let inner: f64 = (1..n).map(|i| f(lo + h * i as f64)).sum();
    h * (0.5 * (f(lo) + f(hi)) + inner)
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, y: &[f64], step: f64) -> Vec<f64> {
    (0..y.len())
        .map(|k| {
            let mut a = y.to_vec();
            let mut b = y.to_vec();
            a[k] += step;
            b[k] -= step;
            (f(&a) - f(&b)) / (2.0 * step)
        })
        .collect()
}

/// Analytic CDF of a 1-D Gaussian mixture.
pub fn mixture_cdf(mix: &Mixture<f64>, y: f64) -> f64 {
    (0..mix.len())
        .map(|i| {
            let n = Normal::new(mix.center(i)[0], mix.bandwidth(i)[0]).unwrap();
            mix.weights()[i] * n.cdf(y)
        })
        .sum()
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let f = cdf(y);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Dense local grid search around `center`: repeated zoom over a square box.
pub fn local_grid_max(
    f: impl Fn(&[f64]) -> f64,
    center: &[f64],
    half_width: f64,
) -> (Vec<f64>, f64) {
    let mut c = center.to_vec();
    let mut half = half_width;
    let mut best = (c.clone(), f(&c));
    for _ in 0..6 {
        let n = 100;
        let d = c.len();
        let total = (n + 1usize).pow(d as u32);
        for flat in 0..total {
            let mut idx = flat;
            let mut p = vec![0.0; d];
            for k in (0..d).rev() {
                let i = idx % (n + 1);
                idx /= n + 1;
                p[k] = c[k] - half + 2.0 * half * i as f64 / n as f64;
            }
            let v = f(&p);
            if v > best.1 {
                best = (p, v);
            }
        }
        c = best.0.clone();
        half /= 25.0;
    }
    best
}
