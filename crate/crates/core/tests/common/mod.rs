//! Test-only oracles. Everything here works on plain `Vec`s and nested loops
//! and shares no code path with the library beyond the model's raw fields.

#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use spinrbm::{RbmModel, SpinBatch};

pub fn random_model(n_v: usize, n_h: usize, std: f64, seed: u64) -> RbmModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std).unwrap();
    let mu_dist = Uniform::new(-0.9, 0.9).unwrap();
    let w = Array2::from_shape_simple_fn((n_v, n_h), || normal.sample(&mut rng));
    let b = Array1::from_shape_simple_fn(n_v, || normal.sample(&mut rng));
    let mu = Array1::from_shape_simple_fn(n_v, || mu_dist.sample(&mut rng));
    RbmModel::new(w, b, mu).unwrap()
}

pub fn random_spins(rows: usize, cols: usize, seed: u64) -> SpinBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data =
        Array2::from_shape_simple_fn((rows, cols), || if rng.random::<bool>() { 1i8 } else { -1 });
    SpinBatch::new(data).unwrap()
}

/// Bit `j` of `index` set means unit `j` is +1.
pub fn config(index: usize, n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| if index >> j & 1 == 1 { 1.0 } else { -1.0 })
        .collect()
}

pub fn index_of(spins: &[i8]) -> usize {
    spins
        .iter()
        .enumerate()
        .map(|(j, &s)| if s > 0 { 1 << j } else { 0 })
        .sum()
}

/// `U(v, h)` written out term by term.
#[allow(clippy::needless_range_loop)]
pub fn energy(m: &RbmModel, v: &[f64], h: &[f64]) -> f64 {
    let (n_v, n_h) = m.weights.dim();
    let mut e = 0.0;
    for j in 0..n_v {
        let c = v[j] - m.centering[j];
        e -= m.visible_bias[j] * c;
        for i in 0..n_h {
            e -= c * m.weights[(j, i)] * h[i];
        }
    }
    e
}

/// Unnormalized joint weights `exp(-U(v, h))`, indexed `[v][h]`.
pub fn joint_weights(m: &RbmModel) -> Vec<Vec<f64>> {
    let (n_v, n_h) = m.weights.dim();
    (0..1usize << n_v)
        .map(|a| {
            let v = config(a, n_v);
            (0..1usize << n_h)
                .map(|b| (-energy(m, &v, &config(b, n_h))).exp())
                .collect()
        })
        .collect()
}

/// Exact `p(v)` over all visible configurations.
pub fn visible_marginal(m: &RbmModel) -> Vec<f64> {
    let w = joint_weights(m);
    let rows: Vec<f64> = w.iter().map(|r| r.iter().sum()).collect();
    let z: f64 = rows.iter().sum();
    rows.into_iter().map(|x| x / z).collect()
}

/// Mean `-log p(v)` over `data`, by direct summation (no log-sum-exp).
pub fn brute_nll(m: &RbmModel, data: &SpinBatch) -> f64 {
    let p = visible_marginal(m);
    let n = data.len() as f64;
    data.view()
        .rows()
        .into_iter()
        .map(|r| -p[index_of(r.as_slice().unwrap())].ln())
        .sum::<f64>()
        / n
}

/// `E[h | v]` by enumerating hidden configurations.
pub fn hidden_mean(m: &RbmModel, v: &[f64]) -> Vec<f64> {
    let n_h = m.weights.ncols();
    let mut num = vec![0.0; n_h];
    let mut z = 0.0;
    for b in 0..1usize << n_h {
        let h = config(b, n_h);
        let w = (-energy(m, v, &h)).exp();
        z += w;
        for i in 0..n_h {
            num[i] += w * h[i];
        }
    }
    num.into_iter().map(|x| x / z).collect()
}

/// `p(v | h)` over all visible configurations.
pub fn visible_conditional(m: &RbmModel, h: &[f64]) -> Vec<f64> {
    let n_v = m.weights.nrows();
    let w: Vec<f64> = (0..1usize << n_v)
        .map(|a| (-energy(m, &config(a, n_v), h)).exp())
        .collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Empirical distribution of the rows of `batch` over visible configurations.
pub fn empirical(batch: &SpinBatch) -> Vec<f64> {
    let mut counts = vec![0.0; 1 << batch.width()];
    for r in batch.view().rows() {
        counts[index_of(r.as_slice().unwrap())] += 1.0;
    }
    let n = batch.len() as f64;
    counts.into_iter().map(|c| c / n).collect()
}

/// Central finite-difference gradient of `f` with respect to `(b, W)`.
pub fn finite_difference<F: Fn(&RbmModel) -> f64>(
    m: &RbmModel,
    step: f64,
    f: F,
) -> (Vec<f64>, Vec<f64>) {
    let (n_v, n_h) = m.weights.dim();
    let mut d_b = Vec::with_capacity(n_v);
    for j in 0..n_v {
        let mut plus = m.clone();
        plus.visible_bias[j] += step;
        let mut minus = m.clone();
        minus.visible_bias[j] -= step;
        d_b.push((f(&plus) - f(&minus)) / (2.0 * step));
    }
    let mut d_w = Vec::with_capacity(n_v * n_h);
    for j in 0..n_v {
        for i in 0..n_h {
            let mut plus = m.clone();
            plus.weights[(j, i)] += step;
            let mut minus = m.clone();
            minus.weights[(j, i)] -= step;
            d_w.push((f(&plus) - f(&minus)) / (2.0 * step));
        }
    }
    (d_b, d_w)
}

/// `max_i |a_i - b_i| / max(|a_i|, |b_i|)`.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let scale = x.abs().max(y.abs());
            if scale == 0.0 {
                0.0
            } else {
                (x - y).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}
