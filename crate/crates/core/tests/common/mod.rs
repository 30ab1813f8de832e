//! Independent reference solvers and instance generators shared by the
//! integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use shapereg::rng::{seeded, SeededRng};

/// Weighted isotonic regression by exhaustive search over partitions into
/// consecutive blocks. The optimum is constant on blocks at their weighted
/// means, so the best feasible partition is the projection.
pub fn brute_isotonic(y: &[f64], w: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << (n - 1)) {
        // bit i set => block boundary after position i
        let mut fit = Vec::with_capacity(n);
        let mut start = 0;
        let mut prev = f64::NEG_INFINITY;
        let mut feasible = true;
        for i in 0..n {
            if i == n - 1 || mask & (1 << i) != 0 {
                let sw: f64 = w[start..=i].iter().sum();
                let m = (start..=i).map(|k| w[k] * y[k]).sum::<f64>() / sw;
                if m < prev - 1e-12 {
                    feasible = false;
                    break;
                }
                prev = m;
                fit.extend(std::iter::repeat_n(m, i + 1 - start));
                start = i + 1;
            }
        }
        if !feasible {
            continue;
        }
        let sse: f64 = (0..n).map(|i| w[i] * (y[i] - fit[i]).powi(2)).sum();
        if best.as_ref().is_none_or(|(b, _)| sse < *b) {
            best = Some((sse, fit));
        }
    }
    best.expect("the single-block partition is always feasible").1
}

/// Weighted convex regression by enumerating active hinge sets.
///
/// Fits θ = a + b·t + Σ_{j∈S} c_j (t − t_j)_+ by unconstrained weighted
/// least squares for every subset S of interior knots, keeps solutions with
/// c ≥ 0, and returns the one with the smallest weighted SSE.
pub fn brute_convex(t: &[f64], y: &[f64], w: &[f64]) -> Vec<f64> {
    let n = t.len();
    if n <= 2 {
        return y.to_vec();
    }
    let interior: Vec<usize> = (1..n - 1).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << interior.len()) {
        let active: Vec<usize> = interior
            .iter()
            .enumerate()
            .filter(|(b, _)| mask & (1 << b) != 0)
            .map(|(_, &j)| j)
            .collect();
        let p = 2 + active.len();
        let design = DMatrix::from_fn(n, p, |i, k| match k {
            0 => 1.0,
            1 => t[i],
            _ => (t[i] - t[active[k - 2]]).max(0.0),
        });
        let sw = DMatrix::from_diagonal(&DVector::from_iterator(n, w.iter().map(|v| v.sqrt())));
        let a = &sw * &design;
        let b = &sw * DVector::from_column_slice(y);
        let Ok(coef) = a.clone().svd(true, true).solve(&b, 1e-14) else {
            continue;
        };
        if coef.iter().skip(2).any(|c| *c < -1e-10) {
            continue;
        }
        let theta = &design * &coef;
        let sse: f64 = (0..n).map(|i| w[i] * (y[i] - theta[i]).powi(2)).sum();
        if best.as_ref().is_none_or(|(s, _)| sse < *s) {
            best = Some((sse, theta.iter().copied().collect()));
        }
    }
    best.expect("the affine fit is always feasible").1
}

pub fn rng(seed: u64) -> SeededRng {
    seeded(seed)
}

/// Random isotonic instance: responses with a mild trend, weights in [0.2, 5).
pub fn isotonic_instance(rng: &mut SeededRng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let y = (0..n)
        .map(|i| 0.3 * i as f64 + rng.random_range(-2.0..2.0))
        .collect();
    let w = (0..n).map(|_| rng.random_range(0.2..5.0)).collect();
    (y, w)
}

/// Random convex instance on distinct sorted knots.
pub fn convex_instance(rng: &mut SeededRng, n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut t: Vec<f64> = Vec::with_capacity(n);
    let mut x = rng.random_range(-1.0..1.0);
    for _ in 0..n {
        t.push(x);
        x += rng.random_range(0.05..1.0);
    }
    let c = rng.random_range(-1.0..2.0);
    let y = t
        .iter()
        .map(|v| c * v * v + rng.random_range(-1.0..1.0))
        .collect();
    let w = (0..n).map(|_| rng.random_range(0.2..5.0)).collect();
    (t, y, w)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
