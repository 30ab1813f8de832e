//! Univariate decomposition estimator.
//!
//! For a penalty scale `α`, the responses are augmented to `z = y + α·x`
//! (monotone shape) or `z = y + (α/2)·x²` (convex shape), a shape-restricted
//! least-squares fit `ĝ` of `z` on `x` is computed, and the estimate of the
//! regression function is `f̂(x) = ĝ(x) − penalty(α, x)`. The scale is chosen
//! by fitting on one part of a random split and scoring on the other.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex::{fit_convex_lse, PiecewiseLinearFit};
use crate::data::{default_validate_size, split, DataSet, SplitIndices};
use crate::error::{Error, Result};
use crate::grid::AlphaGrid;
use crate::isotonic::{collapse_ties, fit_isotonic, StepFit};

/// Shape class of the non-parametric component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// Non-decreasing component, linear penalty `α·x`.
    Monotone,
    /// Convex component, quadratic penalty `(α/2)·x²`.
    Convex,
}

impl Shape {
    pub fn penalty(self, alpha: f64, x: f64) -> f64 {
        match self {
            Shape::Monotone => alpha * x,
            Shape::Convex => 0.5 * alpha * x * x,
        }
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "monotone" => Ok(Shape::Monotone),
            "convex" => Ok(Shape::Convex),
            _ => Err(Error::InvalidModel(format!("unknown shape `{s}`"))),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shape::Monotone => "monotone",
            Shape::Convex => "convex",
        })
    }
}

/// Anything that maps a covariate vector to a prediction.
pub trait Predictor {
    fn dim(&self) -> usize;
    fn predict(&self, x: &[f64]) -> f64;
    /// The penalty vector the predictor was fitted with.
    fn alpha(&self) -> Vec<f64>;
}

/// The shape-restricted fit of the augmented responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeFit {
    Step(StepFit),
    PiecewiseLinear(PiecewiseLinearFit),
}

impl ShapeFit {
    pub fn evaluate(&self, q: f64) -> f64 {
        match self {
            ShapeFit::Step(f) => f.evaluate(q),
            ShapeFit::PiecewiseLinear(f) => f.evaluate(q),
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            ShapeFit::Step(_) => Shape::Monotone,
            ShapeFit::PiecewiseLinear(_) => Shape::Convex,
        }
    }
}

/// `f̂(x) = ĝ(x) − penalty(α, x)` for one fixed `α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DecompFitRepr")]
pub struct DecompFit {
    alpha: f64,
    shape: Shape,
    g_fit: ShapeFit,
}

#[derive(Deserialize)]
struct DecompFitRepr {
    alpha: f64,
    shape: Shape,
    g_fit: ShapeFit,
}

impl TryFrom<DecompFitRepr> for DecompFit {
    type Error = Error;

    fn try_from(r: DecompFitRepr) -> Result<Self> {
        Self::new(r.alpha, r.shape, r.g_fit)
    }
}

impl DecompFit {
    pub fn new(alpha: f64, shape: Shape, g_fit: ShapeFit) -> Result<Self> {
        check_alpha(alpha)?;
        if g_fit.shape() != shape {
            return Err(Error::InvalidModel(format!(
                "{shape} estimator carries a {} fit",
                g_fit.shape()
            )));
        }
        Ok(Self { alpha, shape, g_fit })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn g_fit(&self) -> &ShapeFit {
        &self.g_fit
    }

    pub fn predict_at(&self, q: f64) -> f64 {
        self.g_fit.evaluate(q) - self.shape.penalty(self.alpha, q)
    }
}

impl Predictor for DecompFit {
    fn dim(&self) -> usize {
        1
    }

    fn predict(&self, x: &[f64]) -> f64 {
        self.predict_at(x[0])
    }

    fn alpha(&self) -> Vec<f64> {
        vec![self.alpha]
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidGrid(format!(
            "alpha {alpha} must be finite and non-negative"
        )))
    }
}

/// Augmented pairs `(x_i, z_i)` for a univariate dataset.
pub fn augment(data: &DataSet, alpha: f64, shape: Shape) -> Result<(Vec<f64>, Vec<f64>)> {
    if data.d() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: data.d(),
        });
    }
    check_alpha(alpha)?;
    let x = data.x().to_vec();
    let z = x
        .iter()
        .zip(data.y())
        .map(|(&xi, &yi)| yi + shape.penalty(alpha, xi))
        .collect();
    Ok((x, z))
}

/// Fits the shape-restricted component for one fixed `alpha` on `train`.
pub fn fit_for_alpha(train: &DataSet, alpha: f64, shape: Shape) -> Result<DecompFit> {
    let (x, z) = augment(train, alpha, shape)?;
    let pooled = collapse_ties(&x, &z, &vec![1.0; x.len()])?;
    let g_fit = match shape {
        Shape::Monotone => ShapeFit::Step(fit_isotonic(&pooled.knots, &pooled.values, &pooled.weights)?),
        Shape::Convex => ShapeFit::PiecewiseLinear(fit_convex_lse(
            &pooled.knots,
            &pooled.values,
            &pooled.weights,
        )?),
    };
    DecompFit::new(alpha, shape, g_fit)
}

/// Sum of squared prediction errors over `data`.
pub fn validation_sse<P: Predictor + ?Sized>(fit: &P, data: &DataSet) -> f64 {
    data.rows()
        .zip(data.y())
        .map(|(x, y)| {
            let r = y - fit.predict(x);
            r * r
        })
        .sum()
}

/// One row of the selection table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaScore {
    pub alpha: Vec<f64>,
    pub sse: f64,
}

/// Result of split-based penalty selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedModel<F> {
    pub best: F,
    pub split: SplitIndices,
    /// Validation SSE of every grid candidate, in grid order, followed by
    /// the refined candidate when refinement improved on the grid.
    pub table: Vec<AlphaScore>,
    pub refined: bool,
}

impl<F: Predictor> SelectedModel<F> {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.best.predict(x)
    }

    pub fn alpha(&self) -> Vec<f64> {
        self.best.alpha()
    }

    /// Checks that the stored best candidate attains the table minimum.
    pub fn check_argmin(&self) -> Result<()> {
        let alpha = self.best.alpha();
        let min = self
            .table
            .iter()
            .map(|r| r.sse)
            .fold(f64::INFINITY, f64::min);
        match self.table.iter().find(|r| r.alpha == alpha) {
            Some(row) if row.sse == min => Ok(()),
            Some(row) => Err(Error::InvalidModel(format!(
                "selected alpha has SSE {} but the table minimum is {min}",
                row.sse
            ))),
            None => Err(Error::InvalidModel("selected alpha missing from table".into())),
        }
    }
}

impl SelectedModel<DecompFit> {
    pub fn predict_at(&self, q: f64) -> f64 {
        self.best.predict_at(q)
    }
}

/// Orders candidates for tie-breaking: smaller total penalty first.
fn alpha_order(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    sa.total_cmp(&sb).then_with(|| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    })
}

const GOLDEN_EVALS: usize = 30;

/// Split, fit every candidate on the training part, score on the validation
/// part, keep the argmin (ties toward the smaller penalty), then optionally
/// refine by golden-section search.
pub(crate) fn select_with<F, Fit>(
    data: &DataSet,
    grid: &AlphaGrid,
    seed: u64,
    validate_size: Option<usize>,
    fit: Fit,
) -> Result<SelectedModel<F>>
where
    F: Predictor + Send,
    Fit: Fn(&DataSet, &[f64]) -> Result<F> + Sync,
{
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let n = data.n();
    let vs = validate_size.unwrap_or_else(|| default_validate_size(n));
    let split = split(n, vs, seed)?;
    let train = data.subset(&split.train)?;
    let valid = data.subset(&split.validate)?;

    let scored: Vec<(F, f64)> = grid
        .values()
        .par_iter()
        .map(|a| {
            let f = fit(&train, a)?;
            let sse = validation_sse(&f, &valid);
            Ok((f, sse))
        })
        .collect::<Result<_>>()?;

    let table: Vec<AlphaScore> = grid
        .values()
        .iter()
        .zip(&scored)
        .map(|(a, (_, sse))| AlphaScore {
            alpha: a.clone(),
            sse: *sse,
        })
        .collect();

    let mut best_idx = 0;
    for i in 1..table.len() {
        let (cur, best) = (&table[i], &table[best_idx]);
        if cur.sse < best.sse
            || (cur.sse == best.sse && alpha_order(&cur.alpha, &best.alpha).is_lt())
        {
            best_idx = i;
        }
    }
    let best_sse = table[best_idx].sse;
    let mut best = scored
        .into_iter()
        .nth(best_idx)
        .map(|(f, _)| f)
        .expect("index in range");
    let mut table = table;
    let mut refined = false;

    if grid.refine && grid.is_isotropic() {
        let dim = grid.dim();
        let b = table[best_idx].alpha[0];
        let scalars: Vec<f64> = grid.values().iter().map(|v| v[0]).collect();
        let lo = scalars.iter().copied().filter(|&s| s < b).max_by(f64::total_cmp).unwrap_or(b);
        let hi = scalars.iter().copied().filter(|&s| s > b).min_by(f64::total_cmp).unwrap_or(b);
        if lo < hi {
            let eval = |t: f64| -> Result<(F, f64)> {
                let f = fit(&train, &vec![t; dim])?;
                let sse = validation_sse(&f, &valid);
                Ok((f, sse))
            };
            if let Some((t, f, sse)) = golden_section(lo, hi, GOLDEN_EVALS, eval)? {
                if sse < best_sse {
                    best = f;
                    refined = true;
                    table.push(AlphaScore {
                        alpha: vec![t; dim],
                        sse,
                    });
                }
            }
        }
    }

    Ok(SelectedModel {
        best,
        split,
        table,
        refined,
    })
}

/// Golden-section minimisation on `[lo, hi]` using at most `max_evals`
/// evaluations; returns the best evaluated point.
fn golden_section<F>(
    mut lo: f64,
    mut hi: f64,
    max_evals: usize,
    mut eval: impl FnMut(f64) -> Result<(F, f64)>,
) -> Result<Option<(f64, F, f64)>> {
    if max_evals < 2 {
        return Ok(None);
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut best: Option<(f64, F, f64)> = None;
    let keep = |t: f64, f: F, sse: f64, best: &mut Option<(f64, F, f64)>| {
        let better = match best {
            None => true,
            Some((bt, _, bs)) => sse < *bs || (sse == *bs && t < *bt),
        };
        if better {
            *best = Some((t, f, sse));
        }
    };

    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (fc_fit, mut fc) = eval(c)?;
    keep(c, fc_fit, fc, &mut best);
    let (fd_fit, mut fd) = eval(d)?;
    keep(d, fd_fit, fd, &mut best);
    for _ in 2..max_evals {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            let (f, v) = eval(c)?;
            fc = v;
            keep(c, f, v, &mut best);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            let (f, v) = eval(d)?;
            fd = v;
            keep(d, f, v, &mut best);
        }
    }
    Ok(best)
}

/// Split-based penalty selection for univariate data.
pub fn select_alpha(
    data: &DataSet,
    grid: &AlphaGrid,
    shape: Shape,
    seed: u64,
    validate_size: Option<usize>,
) -> Result<SelectedModel<DecompFit>> {
    if data.d() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: data.d(),
        });
    }
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if grid.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: grid.dim(),
        });
    }
    select_with(data, grid, seed, validate_size, |train, a| {
        fit_for_alpha(train, a[0], shape)
    })
}

pub fn predict(model: &SelectedModel<DecompFit>, q: f64) -> f64 {
    model.predict_at(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(x: &[f64], y: &[f64]) -> DataSet {
        DataSet::univariate(x.to_vec(), y.to_vec()).unwrap()
    }

    #[test]
    fn augmentation() {
        let d = ds(&[0.5, 1.0], &[1.0, 0.0]);
        let (_, z) = augment(&d, 0.0, Shape::Monotone).unwrap();
        assert_eq!(z, vec![1.0, 0.0]);
        let (_, z) = augment(&d, 2.0, Shape::Monotone).unwrap();
        assert_eq!(z[0], 2.0);
        let (_, z) = augment(&d, 2.0, Shape::Convex).unwrap();
        assert_eq!(z[1], 1.0);
        let two = DataSet::new(vec![0.0, 1.0], vec![1.0], 2).unwrap();
        assert!(matches!(augment(&two, 1.0, Shape::Monotone), Err(Error::DimensionMismatch { .. })));
        assert!(augment(&d, -1.0, Shape::Monotone).is_err());
    }

    #[test]
    fn noiseless_increasing_data_is_interpolated() {
        let x: Vec<f64> = (0..40).map(|i| (i as f64 + 0.5) / 40.0).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v + v).collect();
        let d = ds(&x, &y);
        for alpha in [0.0, 0.3, 2.0, 17.0] {
            let f = fit_for_alpha(&d, alpha, Shape::Monotone).unwrap();
            for (xi, yi) in x.iter().zip(&y) {
                assert!((f.predict_at(*xi) - yi).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_points_large_alpha() {
        let d = ds(&[0.0, 1.0], &[1.0, 0.0]);
        let f = fit_for_alpha(&d, 50.0, Shape::Monotone).unwrap();
        assert!((f.predict_at(0.0) - 1.0).abs() < 1e-12);
        assert!((f.predict_at(1.0) - 0.0).abs() < 1e-12);
    }

    #[test]
    fn constant_response() {
        let d = ds(&[0.3, 0.1, 0.9, 0.5], &[2.0; 4]);
        let f = fit_for_alpha(&d, 0.0, Shape::Monotone).unwrap();
        for q in [-1.0, 0.2, 0.7, 3.0] {
            assert_eq!(f.predict_at(q), 2.0);
        }
    }

    #[test]
    fn sse_arithmetic() {
        let fit = DecompFit::new(
            0.0,
            Shape::Monotone,
            ShapeFit::Step(StepFit::from_parts(vec![0.0], vec![1.0], vec![1.0]).unwrap()),
        )
        .unwrap();
        assert_eq!(validation_sse(&fit, &ds(&[0.0], &[1.0])), 0.0);
        assert_eq!(validation_sse(&fit, &ds(&[0.0], &[4.0])), 9.0);
        assert_eq!(validation_sse(&fit, &ds(&[0.0, 5.0], &[2.0, 3.0])), 5.0);
    }

    #[test]
    fn prediction_composes_penalty() {
        let step = StepFit::from_parts(vec![0.0, 1.0], vec![0.0, 2.0], vec![1.0; 2]).unwrap();
        let f = DecompFit::new(0.0, Shape::Monotone, ShapeFit::Step(step.clone())).unwrap();
        assert_eq!(f.predict_at(0.25), step.evaluate(0.25));

        let flat = StepFit::from_parts(vec![0.0], vec![4.0], vec![1.0]).unwrap();
        let f = DecompFit::new(1.0, Shape::Monotone, ShapeFit::Step(flat)).unwrap();
        assert_eq!(f.predict_at(2.0), 2.0);

        // ĝ(q) = q² represented exactly at the knots used.
        let knots: Vec<f64> = vec![2.0, 3.0, 4.0];
        let vals: Vec<f64> = knots.iter().map(|k| k * k).collect();
        let pwl = PiecewiseLinearFit::from_parts(knots, vals).unwrap();
        let f = DecompFit::new(2.0, Shape::Convex, ShapeFit::PiecewiseLinear(pwl)).unwrap();
        assert_eq!(f.predict_at(3.0), 0.0);
    }

    #[test]
    fn mismatched_shape_rejected() {
        let flat = StepFit::from_parts(vec![0.0], vec![4.0], vec![1.0]).unwrap();
        assert!(DecompFit::new(1.0, Shape::Convex, ShapeFit::Step(flat)).is_err());
    }

    #[test]
    fn single_candidate_grid() {
        let x: Vec<f64> = (0..30).map(|i| i as f64 / 30.0).collect();
        let y: Vec<f64> = x.iter().map(|v| (3.0 * v).sin()).collect();
        let grid = AlphaGrid::scalar(&[2.5]).unwrap();
        let m = select_alpha(&ds(&x, &y), &grid, Shape::Monotone, 1, None).unwrap();
        assert_eq!(m.table.len(), 1);
        assert_eq!(m.best.alpha(), 2.5);
        m.check_argmin().unwrap();
    }

    #[test]
    fn empty_grid_and_dimension_errors() {
        let two = DataSet::new(vec![0.0, 1.0, 1.0, 0.0], vec![1.0, 2.0], 2).unwrap();
        let grid = AlphaGrid::scalar(&[1.0]).unwrap();
        assert!(matches!(
            select_alpha(&two, &grid, Shape::Monotone, 1, None),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn golden_section_finds_quadratic_minimum() {
        let (t, _, v) = golden_section(0.0, 10.0, 30, |t| Ok(((), (t - 3.7).powi(2))))
            .unwrap()
            .unwrap();
        assert!((t - 3.7).abs() < 1e-4, "{t}");
        assert!(v < 1e-8);
    }

    #[test]
    fn refinement_only_keeps_strict_improvement() {
        let x: Vec<f64> = (0..200).map(|i| (i as f64 + 0.5) / 200.0).collect();
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, v)| (1.0 - 3.0 * v).abs() + 0.05 * (((i * 37) % 11) as f64 - 5.0) / 5.0)
            .collect();
        let d = ds(&x, &y);
        let grid = AlphaGrid::scalar(&[0.0, 1.0, 10.0]).unwrap().with_refine(true);
        let m = select_alpha(&d, &grid, Shape::Monotone, 4, None).unwrap();
        m.check_argmin().unwrap();
        let plain = select_alpha(&d, &grid.clone().with_refine(false), Shape::Monotone, 4, None).unwrap();
        if m.refined {
            assert!(m.table.last().unwrap().sse < plain.table.iter().map(|r| r.sse).fold(f64::INFINITY, f64::min));
            assert_eq!(m.table.len(), 4);
        } else {
            assert_eq!(m, plain);
        }
    }
}
