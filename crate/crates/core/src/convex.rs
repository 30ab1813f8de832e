//! Univariate convex least-squares regression.
//!
//! A convex function sampled at knots `t_0 < ... < t_{K-1}` and linear between
//! them can be written as
//!
//! ```text
//! θ(x) = a + b·x + Σ_j c_j (x − t_j)_+ ,   c_j ≥ 0,  j = 1..K−2
//! ```
//!
//! so the weighted projection onto the convex cone is a non-negative least
//! squares problem in the hinge coefficients `c`. It is solved with the
//! Lawson–Hanson active-set method. For a given set of free hinges the
//! unconstrained fit is a linear spline with breakpoints at those hinges,
//! which is a tridiagonal least-squares problem in the spline's node values,
//! so every inner solve is O(K).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isotonic::{check_knots, check_lengths, check_weights, interpolate, Extrapolation};

/// A fitted convex function stored at its knots.
///
/// Linear between knots, extended linearly beyond the end knots with the
/// boundary secant slopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PwlRepr")]
pub struct PiecewiseLinearFit {
    knots: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct PwlRepr {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<PwlRepr> for PiecewiseLinearFit {
    type Error = Error;

    fn try_from(r: PwlRepr) -> Result<Self> {
        Self::from_parts(r.knots, r.values)
    }
}

/// Slack allowed on the secant-slope ordering, relative to the slope magnitude.
pub const CONVEXITY_TOL: f64 = 1e-8;

impl PiecewiseLinearFit {
    pub fn from_parts(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_knots(&knots)?;
        if values.len() != knots.len() {
            return Err(Error::LengthMismatch {
                what: "values",
                expected: knots.len(),
                found: values.len(),
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteInput("fitted values"));
        }
        let fit = Self { knots, values };
        let slopes = fit.slopes();
        for (j, p) in slopes.windows(2).enumerate() {
            let scale = 1.0 + p[0].abs().max(p[1].abs());
            if p[0] - p[1] > CONVEXITY_TOL * scale {
                return Err(Error::InvalidModel(format!(
                    "secant slopes decrease at knot {}",
                    j + 1
                )));
            }
        }
        Ok(fit)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Secant slopes between consecutive knots.
    pub fn slopes(&self) -> Vec<f64> {
        self.knots
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(k, v)| (v[1] - v[0]) / (k[1] - k[0]))
            .collect()
    }

    pub fn evaluate(&self, q: f64) -> f64 {
        interpolate(&self.knots, &self.values, q, Extrapolation::Linear)
    }
}

pub fn evaluate_pwl(fit: &PiecewiseLinearFit, q: f64) -> f64 {
    fit.evaluate(q)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexSolverOptions {
    /// Cap on active-set iterations (additions plus removals).
    pub max_iters: usize,
    /// Stopping tolerance on the scaled KKT residual.
    pub tol: f64,
}

impl Default for ConvexSolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            tol: 1e-8,
        }
    }
}

/// Weighted convex least squares of `y` on strictly increasing `knots`.
pub fn fit_convex_lse(knots: &[f64], y: &[f64], w: &[f64]) -> Result<PiecewiseLinearFit> {
    fit_convex_lse_with(knots, y, w, ConvexSolverOptions::default())
}

pub fn fit_convex_lse_with(
    knots: &[f64],
    y: &[f64],
    w: &[f64],
    opts: ConvexSolverOptions,
) -> Result<PiecewiseLinearFit> {
    check_knots(knots)?;
    check_lengths(knots.len(), y, w)?;
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteInput("y"));
    }
    check_weights(w)?;

    let k = knots.len();
    if k <= 2 {
        return Ok(PiecewiseLinearFit {
            knots: knots.to_vec(),
            values: y.to_vec(),
        });
    }

    let (xs, x_mean, x_sd) = standardize(knots);
    let (ys, y_mean, y_sd) = standardize(y);
    if y_sd == 0.0 {
        return Ok(PiecewiseLinearFit {
            knots: knots.to_vec(),
            values: y.to_vec(),
        });
    }
    debug_assert!(x_sd > 0.0 && x_mean.is_finite());
    let sw: f64 = w.iter().sum();
    let ws: Vec<f64> = w.iter().map(|v| v / sw).collect();

    let theta = Problem { x: &xs, y: &ys, w: &ws }.solve(opts)?;
    let values = theta.iter().map(|t| y_mean + y_sd * t).collect();
    Ok(PiecewiseLinearFit {
        knots: knots.to_vec(),
        values,
    })
}

fn standardize(v: &[f64]) -> (Vec<f64>, f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd == 0.0 || !sd.is_finite() {
        return (v.iter().map(|a| a - mean).collect(), mean, 0.0);
    }
    (v.iter().map(|a| (a - mean) / sd).collect(), mean, sd)
}

struct Problem<'a> {
    x: &'a [f64],
    y: &'a [f64],
    w: &'a [f64],
}

impl Problem<'_> {
    fn len(&self) -> usize {
        self.x.len()
    }

    /// Lawson–Hanson on the hinge coefficients. `free[j]` marks hinge `j` as
    /// unconstrained (the passive set).
    fn solve(&self, opts: ConvexSolverOptions) -> Result<Vec<f64>> {
        let k = self.len();
        let mut free = vec![false; k];
        let mut theta = self.spline_fit(&free);
        let mut iters = 0;
        let mut last_added: Option<usize> = None;

        loop {
            let (j_max, dual_max) = self.max_dual(&theta, &free);
            if dual_max <= opts.tol {
                return Ok(theta);
            }
            if iters >= opts.max_iters || last_added == Some(j_max) {
                // Re-selecting the hinge just dropped means the dual is at
                // rounding level and no further progress is possible.
                return Err(Error::SolverNotConverged {
                    max_iters: opts.max_iters,
                    residual: dual_max,
                });
            }
            free[j_max] = true;
            iters += 1;

            loop {
                let candidate = self.spline_fit(&free);
                let c_new = hinge_coefficients(self.x, &candidate);
                let blocking: Vec<usize> = (1..k - 1).filter(|&j| free[j] && c_new[j] <= 0.0).collect();
                if blocking.is_empty() {
                    theta = candidate;
                    break;
                }
                let c_old = hinge_coefficients(self.x, &theta);
                let (step, j_block) = blocking
                    .iter()
                    .map(|&j| {
                        let denom = c_old[j] - c_new[j];
                        let s = if denom > 0.0 { (c_old[j] / denom).max(0.0) } else { 0.0 };
                        (s, j)
                    })
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .expect("non-empty");
                for (t, c) in theta.iter_mut().zip(&candidate) {
                    *t += step * (c - *t);
                }
                let c_mid = hinge_coefficients(self.x, &theta);
                free[j_block] = false;
                for j in 1..k - 1 {
                    if free[j] && c_mid[j] <= 1e-14 {
                        free[j] = false;
                    }
                }
                iters += 1;
                if iters >= opts.max_iters {
                    let (_, dual) = self.max_dual(&theta, &free);
                    return Err(Error::SolverNotConverged {
                        max_iters: opts.max_iters,
                        residual: dual,
                    });
                }
            }
            last_added = (!free[j_max]).then_some(j_max);
        }
    }

    /// Gradient of the objective's negative along each fixed hinge:
    /// `Σ_i w_i r_i (x_i − t_j)_+`. Positive values mean adding the hinge helps.
    fn max_dual(&self, theta: &[f64], free: &[bool]) -> (usize, f64) {
        let k = self.len();
        // Suffix sums over i > j of w r and w r x.
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        let mut best = (0, f64::NEG_INFINITY);
        for j in (1..k - 1).rev() {
            let i = j + 1;
            let wr = self.w[i] * (self.y[i] - theta[i]);
            s0 += wr;
            s1 += wr * self.x[i];
            if !free[j] {
                let d = s1 - self.x[j] * s0;
                if d > best.1 {
                    best = (j, d);
                }
            }
        }
        best
    }

    /// Weighted least-squares linear spline with breakpoints at the free hinges,
    /// returned as values at every knot.
    fn spline_fit(&self, free: &[bool]) -> Vec<f64> {
        let k = self.len();
        let nodes: Vec<usize> = (0..k).filter(|&j| j == 0 || j == k - 1 || free[j]).collect();
        let m = nodes.len();
        // Symmetric tridiagonal normal equations in the node values.
        let mut diag = vec![0.0; m];
        let mut off = vec![0.0; m - 1];
        let mut rhs = vec![0.0; m];
        let mut seg = 0;
        for i in 0..k {
            while seg + 1 < m - 1 && nodes[seg + 1] <= i {
                seg += 1;
            }
            let (a, b) = (nodes[seg], nodes[seg + 1]);
            let lam = (self.x[i] - self.x[a]) / (self.x[b] - self.x[a]);
            let (p, q) = (1.0 - lam, lam);
            let w = self.w[i];
            diag[seg] += w * p * p;
            diag[seg + 1] += w * q * q;
            off[seg] += w * p * q;
            rhs[seg] += w * p * self.y[i];
            rhs[seg + 1] += w * q * self.y[i];
        }
        let v = solve_tridiagonal(&diag, &off, &rhs);
        let mut theta = Vec::with_capacity(k);
        let mut seg = 0;
        for i in 0..k {
            while seg + 1 < m - 1 && nodes[seg + 1] <= i {
                seg += 1;
            }
            let (a, b) = (nodes[seg], nodes[seg + 1]);
            theta.push(if i == a {
                v[seg]
            } else if i == b {
                v[seg + 1]
            } else {
                let lam = (self.x[i] - self.x[a]) / (self.x[b] - self.x[a]);
                (1.0 - lam) * v[seg] + lam * v[seg + 1]
            });
        }
        theta
    }
}

/// Slope change at each interior knot; entries 0 and K−1 are zero.
fn hinge_coefficients(x: &[f64], theta: &[f64]) -> Vec<f64> {
    let k = x.len();
    let mut c = vec![0.0; k];
    for j in 1..k - 1 {
        let left = (theta[j] - theta[j - 1]) / (x[j] - x[j - 1]);
        let right = (theta[j + 1] - theta[j]) / (x[j + 1] - x[j]);
        c[j] = right - left;
    }
    c
}

/// LDLᵀ solve of a symmetric positive-definite tridiagonal system.
fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    let mut d = diag.to_vec();
    let mut l = vec![0.0; m.saturating_sub(1)];
    let mut z = rhs.to_vec();
    for i in 1..m {
        l[i - 1] = off[i - 1] / d[i - 1];
        d[i] -= l[i - 1] * off[i - 1];
        z[i] -= l[i - 1] * z[i - 1];
    }
    let mut v = vec![0.0; m];
    v[m - 1] = z[m - 1] / d[m - 1];
    for i in (0..m - 1).rev() {
        v[i] = z[i] / d[i] - l[i] * v[i + 1];
    }
    v
}
