//! Additive monotone-plus-linear estimation by backfitting.
//!
//! With `z_i = y_i + αᵀx_i`, the model `z ≈ μ + Σ_j g_j(x_j)` with each `g_j`
//! non-decreasing is fitted by cyclic coordinate descent: each update is the
//! isotonic regression of the partial residual on one coordinate, followed by
//! moving the component's mean into the intercept.

use serde::{Deserialize, Serialize};

use crate::data::DataSet;
use crate::decomp::{select_with, Predictor, SelectedModel};
use crate::error::{Error, Result};
use crate::grid::AlphaGrid;
use crate::isotonic::{pava, StepFit};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackfitOptions {
    /// Maximum number of full sweeps over the coordinates.
    pub max_iters: usize,
    /// Stop once a sweep lowers the training risk by less than this fraction.
    pub tol: f64,
}

impl Default for BackfitOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-8,
        }
    }
}

/// `f̂(x) = μ + Σ_j g_j(x_j) − αᵀx` with mean-zero components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AdditiveFitRepr")]
pub struct AdditiveFit {
    alpha: Vec<f64>,
    components: Vec<StepFit>,
    intercept: f64,
    iterations: usize,
    final_risk: f64,
    converged: bool,
}

#[derive(Deserialize)]
struct AdditiveFitRepr {
    alpha: Vec<f64>,
    components: Vec<StepFit>,
    intercept: f64,
    iterations: usize,
    final_risk: f64,
    converged: bool,
}

impl TryFrom<AdditiveFitRepr> for AdditiveFit {
    type Error = Error;

    fn try_from(r: AdditiveFitRepr) -> Result<Self> {
        if r.alpha.is_empty() || r.alpha.len() != r.components.len() {
            return Err(Error::InvalidModel(format!(
                "{} penalty entries for {} components",
                r.alpha.len(),
                r.components.len()
            )));
        }
        check_alpha(&r.alpha)?;
        if !r.intercept.is_finite() {
            return Err(Error::NonFiniteInput("intercept"));
        }
        Ok(Self {
            alpha: r.alpha,
            components: r.components,
            intercept: r.intercept,
            iterations: r.iterations,
            final_risk: r.final_risk,
            converged: r.converged,
        })
    }
}

impl AdditiveFit {
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn components(&self) -> &[StepFit] {
        &self.components
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Training risk `Σ (z_i − μ − Σ_j g_j(x_ij))²` after the last sweep.
    pub fn final_risk(&self) -> f64 {
        self.final_risk
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Turns a fit that hit the sweep cap into [`Error::NotConverged`].
    pub fn ensure_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                risk: self.final_risk,
            })
        }
    }

    pub fn predict_additive(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.components.len() {
            return Err(Error::DimensionMismatch {
                expected: self.components.len(),
                found: x.len(),
            });
        }
        Ok(self.eval(x))
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.intercept
            + self
                .components
                .iter()
                .zip(&self.alpha)
                .zip(x)
                .map(|((g, a), &xj)| g.evaluate(xj) - a * xj)
                .sum::<f64>()
    }
}

impl Predictor for AdditiveFit {
    fn dim(&self) -> usize {
        self.components.len()
    }

    /// Panics on a dimension mismatch; use [`AdditiveFit::predict_additive`] for a checked call.
    fn predict(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.components.len(), "covariate dimension");
        self.eval(x)
    }

    fn alpha(&self) -> Vec<f64> {
        self.alpha.clone()
    }
}

fn check_alpha(alpha: &[f64]) -> Result<()> {
    match alpha.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        Some(a) => Err(Error::InvalidGrid(format!(
            "alpha {a} must be finite and non-negative"
        ))),
        None => Ok(()),
    }
}

/// Per-coordinate sort order and tie groups of the training design.
struct CoordinatePlan {
    knots: Vec<f64>,
    /// Knot index of each observation.
    group: Vec<usize>,
    counts: Vec<f64>,
}

impl CoordinatePlan {
    fn new(values: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let mut knots = Vec::new();
        let mut counts = Vec::new();
        let mut group = vec![0; values.len()];
        for &i in &order {
            if knots.last() != Some(&values[i]) {
                knots.push(values[i]);
                counts.push(0.0);
            }
            let g = knots.len() - 1;
            group[i] = g;
            counts[g] += 1.0;
        }
        Self { knots, group, counts }
    }
}

/// Backfits the additive model on `train` for a fixed penalty vector.
pub fn backfit(train: &DataSet, alpha: &[f64], opts: BackfitOptions) -> Result<AdditiveFit> {
    backfit_observed(train, alpha, opts, |_, _, _| {})
}

/// As [`backfit`], calling `observer(sweep, coordinate, risk)` after every
/// single-coordinate update.
pub fn backfit_observed(
    train: &DataSet,
    alpha: &[f64],
    opts: BackfitOptions,
    mut observer: impl FnMut(usize, usize, f64),
) -> Result<AdditiveFit> {
    let (n, d) = (train.n(), train.d());
    if alpha.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: alpha.len(),
        });
    }
    check_alpha(alpha)?;
    if opts.max_iters == 0 || opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::InvalidModel(
            "backfitting needs max_iters >= 1 and tol > 0".into(),
        ));
    }

    let z: Vec<f64> = train
        .rows()
        .zip(train.y())
        .map(|(x, y)| y + x.iter().zip(alpha).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let plans: Vec<CoordinatePlan> = (0..d)
        .map(|j| CoordinatePlan::new(&train.column(j).collect::<Vec<_>>()))
        .collect();

    let mut intercept = z.iter().sum::<f64>() / n as f64;
    let mut values: Vec<Vec<f64>> = plans.iter().map(|p| vec![0.0; p.knots.len()]).collect();
    // Sum over components of g_j(x_ij) for each observation.
    let mut total = vec![0.0; n];
    let risk_of = |intercept: f64, total: &[f64]| -> f64 {
        z.iter()
            .zip(total)
            .map(|(zi, ti)| (zi - intercept - ti).powi(2))
            .sum()
    };
    let mut risk = risk_of(intercept, &total);
    let mut iterations = 0;
    let mut converged = false;

    let mut sums = Vec::new();
    while iterations < opts.max_iters {
        let risk_before = risk;
        for (j, plan) in plans.iter().enumerate() {
            let vals = &mut values[j];
            sums.clear();
            sums.resize(plan.knots.len(), 0.0);
            for i in 0..n {
                let g = plan.group[i];
                sums[g] += z[i] - intercept - total[i] + vals[g];
            }
            let means: Vec<f64> = sums.iter().zip(&plan.counts).map(|(s, c)| s / c).collect();
            let mut fitted = pava(&means, &plan.counts);
            let center = fitted.iter().zip(&plan.counts).map(|(v, c)| v * c).sum::<f64>() / n as f64;
            fitted.iter_mut().for_each(|v| *v -= center);
            intercept += center;
            for (t, &g) in total.iter_mut().zip(&plan.group) {
                *t += fitted[g] - vals[g];
            }
            *vals = fitted;
            risk = risk_of(intercept, &total);
            observer(iterations, j, risk);
        }
        iterations += 1;
        if risk_before - risk <= opts.tol * risk_before {
            converged = true;
            break;
        }
    }

    let components = plans
        .into_iter()
        .zip(values)
        .map(|(p, v)| StepFit::from_parts(p.knots, v, p.counts))
        .collect::<Result<Vec<_>>>()?;
    Ok(AdditiveFit {
        alpha: alpha.to_vec(),
        components,
        intercept,
        iterations,
        final_risk: risk,
        converged,
    })
}

/// Split-based penalty selection for the additive model.
///
/// A one-dimensional grid is replicated across coordinates. Refinement, when
/// enabled, searches along the common scale and requires an isotropic grid.
pub fn select_alpha_additive(
    data: &DataSet,
    grid: &AlphaGrid,
    seed: u64,
    validate_size: Option<usize>,
    opts: BackfitOptions,
) -> Result<SelectedModel<AdditiveFit>> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let grid = grid.replicate(data.d())?;
    select_with(data, &grid, seed, validate_size, |train, a| backfit(train, a, opts))
}

pub fn predict_additive(fit: &AdditiveFit, x: &[f64]) -> Result<f64> {
    fit.predict_additive(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{fit_for_alpha, select_alpha, Shape};

    fn lcg_points(n: usize, d: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        (0..n * d)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect()
    }

    #[test]
    fn constant_response_gives_flat_components() {
        let x = lcg_points(50, 3, 1);
        let ds = DataSet::new(x, vec![1.75; 50], 3).unwrap();
        let fit = backfit(&ds, &[0.0; 3], BackfitOptions::default()).unwrap();
        assert!((fit.intercept() - 1.75).abs() < 1e-12);
        for c in fit.components() {
            assert!(c.values().iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn one_dimension_matches_univariate_fit() {
        let x = lcg_points(80, 1, 3);
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| (6.0 * v).sin() + 0.1 * ((i % 7) as f64 - 3.0)).collect();
        let ds = DataSet::univariate(x.clone(), y).unwrap();
        for alpha in [0.0, 1.5, 8.0] {
            let add = backfit(&ds, &[alpha], BackfitOptions::default()).unwrap();
            let uni = fit_for_alpha(&ds, alpha, Shape::Monotone).unwrap();
            for q in x.iter().copied().chain([-0.5, 0.25, 1.5]) {
                let a = add.predict_additive(&[q]).unwrap();
                let b = uni.predict_at(q);
                assert!((a - b).abs() < 1e-9, "alpha {alpha}, q {q}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn noiseless_additive_monotone_data_is_fit() {
        let n = 300;
        let x = lcg_points(n, 2, 5);
        let y: Vec<f64> = x.chunks(2).map(|r| r[0].powi(3) + (r[1] * 4.0).floor()).collect();
        let ds = DataSet::new(x, y.clone(), 2).unwrap();
        let opts = BackfitOptions { max_iters: 500, tol: 1e-10 };
        let fit = backfit(&ds, &[0.0, 0.0], opts).unwrap();
        let tss: f64 = {
            let m = y.iter().sum::<f64>() / n as f64;
            y.iter().map(|v| (v - m).powi(2)).sum()
        };
        assert!(fit.final_risk() < 1e-3 * tss, "risk {} vs tss {tss}", fit.final_risk());
    }

    #[test]
    fn risk_never_increases_and_components_are_centered() {
        let n = 400;
        let x = lcg_points(n, 3, 9);
        let y: Vec<f64> = x
            .chunks(3)
            .enumerate()
            .map(|(i, r)| (1.0 - 3.0 * r[0]).abs() - r[1] * r[1] + (5.0 * r[2]).sin() + 0.2 * (((i * 31) % 17) as f64 / 8.0 - 1.0))
            .collect();
        let ds = DataSet::new(x, y, 3).unwrap();
        let mut prev = f64::INFINITY;
        let fit = backfit_observed(&ds, &[3.0, 2.0, 5.0], BackfitOptions::default(), |_, _, r| {
            assert!(r <= prev * (1.0 + 1e-12), "risk rose from {prev} to {r}");
            prev = r;
        })
        .unwrap();
        for c in fit.components() {
            assert!(c.weighted_mean().abs() < 1e-9);
        }
        assert!(fit.converged());
        fit.ensure_converged().unwrap();
    }

    #[test]
    fn moving_constants_into_intercept_leaves_predictions() {
        let x = lcg_points(120, 2, 13);
        let y: Vec<f64> = x.chunks(2).map(|r| r[0] - 2.0 * r[1]).collect();
        let ds = DataSet::new(x, y, 2).unwrap();
        let fit = backfit(&ds, &[1.0, 3.0], BackfitOptions::default()).unwrap();
        let mut moved = fit.clone();
        moved.components[1].shift(-0.7);
        moved.intercept -= 0.7;
        for q in [[0.1, 0.9], [0.5, 0.5], [-1.0, 2.0]] {
            let a = fit.predict_additive(&q).unwrap();
            let b = moved.predict_additive(&q).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn non_convergence_is_reported_but_fit_returned() {
        let x = lcg_points(200, 2, 21);
        let y: Vec<f64> = x.chunks(2).map(|r| (9.0 * r[0]).sin() * (7.0 * r[1]).cos()).collect();
        let ds = DataSet::new(x, y, 2).unwrap();
        let fit = backfit(&ds, &[1.0, 1.0], BackfitOptions { max_iters: 1, tol: 1e-15 }).unwrap();
        assert_eq!(fit.iterations(), 1);
        if !fit.converged() {
            assert!(matches!(fit.ensure_converged(), Err(Error::NotConverged { iterations: 1, .. })));
        }
    }

    #[test]
    fn prediction_rules() {
        let zero = StepFit::from_parts(vec![0.0], vec![0.0], vec![1.0]).unwrap();
        let ident = StepFit::from_parts(vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0; 2]).unwrap();
        let flat = AdditiveFit {
            alpha: vec![0.0, 0.0],
            components: vec![zero.clone(), zero.clone()],
            intercept: 2.5,
            iterations: 1,
            final_risk: 0.0,
            converged: true,
        };
        assert_eq!(flat.predict_additive(&[0.3, -4.0]).unwrap(), 2.5);
        let cancel = AdditiveFit {
            alpha: vec![1.0, 0.0],
            components: vec![ident.clone(), zero],
            ..flat.clone()
        };
        assert!((cancel.predict_additive(&[0.4, 0.7]).unwrap() - 2.5).abs() < 1e-15);
        // Outside the knot range: component constant at 1, penalty keeps going.
        assert!((cancel.predict_additive(&[3.0, 0.0]).unwrap() - (2.5 + 1.0 - 3.0)).abs() < 1e-15);
        assert!(matches!(cancel.predict_additive(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn selection_in_one_dimension_matches_decomp() {
        let x = lcg_points(150, 1, 17);
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| (1.0 - 3.0 * v).abs() + 0.1 * ((i % 5) as f64 - 2.0)).collect();
        let ds = DataSet::univariate(x, y).unwrap();
        let grid = AlphaGrid::scalar(&[0.0, 1.0, 3.0, 6.0]).unwrap();
        let a = select_alpha_additive(&ds, &grid, 42, None, BackfitOptions::default()).unwrap();
        let b = select_alpha(&ds, &grid, Shape::Monotone, 42, None).unwrap();
        assert_eq!(a.split, b.split);
        for (ra, rb) in a.table.iter().zip(&b.table) {
            assert!((ra.sse - rb.sse).abs() < 1e-9);
        }
        assert_eq!(a.alpha(), b.alpha());
    }

    #[test]
    fn single_candidate_and_dimension_errors() {
        let x = lcg_points(60, 2, 2);
        let y: Vec<f64> = x.chunks(2).map(|r| r[0] + r[1]).collect();
        let ds = DataSet::new(x, y, 2).unwrap();
        let grid = AlphaGrid::scalar(&[2.0]).unwrap();
        let m = select_alpha_additive(&ds, &grid, 1, None, BackfitOptions::default()).unwrap();
        assert_eq!(m.alpha(), vec![2.0, 2.0]);
        assert_eq!(m.table.len(), 1);
        let bad = AlphaGrid::new(vec![vec![1.0, 1.0, 1.0]], false).unwrap();
        assert!(select_alpha_additive(&ds, &bad, 1, None, BackfitOptions::default()).is_err());
        assert!(backfit(&ds, &[1.0], BackfitOptions::default()).is_err());
    }
}
