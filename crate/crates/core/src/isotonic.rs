//! Weighted univariate isotonic regression by Pool Adjacent Violators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A fitted non-decreasing function stored at its distinct design points.
///
/// Between knots the prediction interpolates linearly; outside the knot
/// range it is constant at the nearest fitted value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepFitRepr")]
pub struct StepFit {
    knots: Vec<f64>,
    values: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct StepFitRepr {
    knots: Vec<f64>,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<StepFitRepr> for StepFit {
    type Error = Error;

    fn try_from(r: StepFitRepr) -> Result<Self> {
        Self::from_parts(r.knots, r.values, r.weights)
    }
}

impl StepFit {
    /// Validates and assembles a fit from raw arrays.
    pub fn from_parts(knots: Vec<f64>, values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_knots(&knots)?;
        check_lengths(knots.len(), &values, &weights)?;
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteInput("fitted values"));
        }
        check_weights(&weights)?;
        if let Some(j) = values.windows(2).position(|p| p[0] > p[1]) {
            return Err(Error::InvalidModel(format!(
                "step fit values decrease between knots {j} and {}",
                j + 1
            )));
        }
        Ok(Self {
            knots,
            values,
            weights,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Evaluates the fit at `q` (see the type docs for the interpolation rule).
    pub fn evaluate(&self, q: f64) -> f64 {
        interpolate(&self.knots, &self.values, q, Extrapolation::Constant)
    }

    /// Subtracts `c` from every fitted value.
    #[cfg(test)]
    pub(crate) fn shift(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v -= c);
    }

    /// Weighted mean of the fitted values.
    pub fn weighted_mean(&self) -> f64 {
        let sw: f64 = self.weights.iter().sum();
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v * w)
            .sum::<f64>()
            / sw
    }
}

pub fn evaluate_step(fit: &StepFit, q: f64) -> f64 {
    fit.evaluate(q)
}

/// Design points with ties merged: strictly increasing knots, pooled responses and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Collapsed {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Sorts by `x` and replaces each run of equal `x` by one knot carrying the
/// summed weight and the weighted mean response.
pub fn collapse_ties(x: &[f64], y: &[f64], w: &[f64]) -> Result<Collapsed> {
    if x.is_empty() {
        return Err(Error::LengthMismatch {
            what: "x",
            expected: 1,
            found: 0,
        });
    }
    check_lengths(x.len(), y, w)?;
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteInput("x"));
    }
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteInput("y"));
    }
    check_weights(w)?;

    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));

    let mut out = Collapsed {
        knots: Vec::new(),
        values: Vec::new(),
        weights: Vec::new(),
    };
    let mut start = 0;
    while start < order.len() {
        let xv = x[order[start]];
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == xv {
            end += 1;
        }
        let group = &order[start..end];
        let value = if group.len() == 1 {
            y[group[0]]
        } else {
            let sw: f64 = group.iter().map(|&i| w[i]).sum();
            let swy: f64 = group.iter().map(|&i| w[i] * y[i]).sum();
            swy / sw
        };
        out.knots.push(xv);
        out.values.push(value);
        out.weights.push(group.iter().map(|&i| w[i]).sum());
        start = end;
    }
    Ok(out)
}

/// Weighted isotonic regression of `y` on strictly increasing `knots`.
pub fn fit_isotonic(knots: &[f64], y: &[f64], w: &[f64]) -> Result<StepFit> {
    if knots.is_empty() {
        return Err(Error::LengthMismatch {
            what: "knots",
            expected: 1,
            found: 0,
        });
    }
    check_lengths(knots.len(), y, w)?;
    check_knots(knots)?;
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteInput("y"));
    }
    check_weights(w)?;
    Ok(StepFit {
        knots: knots.to_vec(),
        values: pava(y, w),
        weights: w.to_vec(),
    })
}

struct Block {
    len: usize,
    sum_w: f64,
    sum_wy: f64,
    min: f64,
    max: f64,
    value: f64,
}

/// Projection of `y` onto the non-decreasing cone under weights `w`.
///
/// Single forward pass over a stack of pooled blocks. A violation is a strict
/// decrease, so already-monotone input is returned bit-for-bit. Pooled means
/// are clamped to the block's data range to absorb rounding.
pub(crate) fn pava(y: &[f64], w: &[f64]) -> Vec<f64> {
    let mut stack: Vec<Block> = Vec::with_capacity(y.len());
    for (&yi, &wi) in y.iter().zip(w) {
        let mut cur = Block {
            len: 1,
            sum_w: wi,
            sum_wy: wi * yi,
            min: yi,
            max: yi,
            value: yi,
        };
        while let Some(top) = stack.last() {
            if top.value <= cur.value {
                break;
            }
            let top = stack.pop().expect("non-empty");
            cur.len += top.len;
            cur.sum_w += top.sum_w;
            cur.sum_wy += top.sum_wy;
            cur.min = cur.min.min(top.min);
            cur.max = cur.max.max(top.max);
            cur.value = (cur.sum_wy / cur.sum_w).clamp(cur.min, cur.max);
        }
        stack.push(cur);
    }
    let mut out = Vec::with_capacity(y.len());
    for b in stack {
        out.extend(std::iter::repeat_n(b.value, b.len));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Extrapolation {
    Constant,
    Linear,
}

/// Piecewise-linear interpolation through `(knots, values)`.
pub(crate) fn interpolate(knots: &[f64], values: &[f64], q: f64, ext: Extrapolation) -> f64 {
    let n = knots.len();
    if n == 1 {
        return values[0];
    }
    let seg = |j: usize| {
        let (k0, k1) = (knots[j], knots[j + 1]);
        let (v0, v1) = (values[j], values[j + 1]);
        v0 + (v1 - v0) * ((q - k0) / (k1 - k0))
    };
    let inner = |j: usize| {
        let (lo, hi) = (values[j].min(values[j + 1]), values[j].max(values[j + 1]));
        seg(j).clamp(lo, hi)
    };
    if q <= knots[0] {
        return match ext {
            Extrapolation::Constant => values[0],
            Extrapolation::Linear if q == knots[0] => values[0],
            Extrapolation::Linear => seg(0),
        };
    }
    if q >= knots[n - 1] {
        return match ext {
            Extrapolation::Constant => values[n - 1],
            Extrapolation::Linear if q == knots[n - 1] => values[n - 1],
            Extrapolation::Linear => seg(n - 2),
        };
    }
    // First knot strictly greater than q; q lies in [knots[j-1], knots[j]).
    let j = knots.partition_point(|&k| k <= q);
    if knots[j - 1] == q {
        return values[j - 1];
    }
    inner(j - 1)
}

pub(crate) fn check_knots(knots: &[f64]) -> Result<()> {
    if knots.is_empty() {
        return Err(Error::LengthMismatch {
            what: "knots",
            expected: 1,
            found: 0,
        });
    }
    if !knots.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteInput("knots"));
    }
    match knots.windows(2).position(|p| p[0] >= p[1]) {
        Some(j) => Err(Error::UnsortedKnots(j + 1)),
        None => Ok(()),
    }
}

pub(crate) fn check_lengths(n: usize, y: &[f64], w: &[f64]) -> Result<()> {
    if y.len() != n {
        return Err(Error::LengthMismatch {
            what: "y",
            expected: n,
            found: y.len(),
        });
    }
    if w.len() != n {
        return Err(Error::LengthMismatch {
            what: "weights",
            expected: n,
            found: w.len(),
        });
    }
    Ok(())
}

pub(crate) fn check_weights(w: &[f64]) -> Result<()> {
    match w.iter().position(|&v| !(v.is_finite() && v > 0.0)) {
        Some(i) => Err(Error::NonPositiveWeight(i)),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ones(n: usize) -> Vec<f64> {
        vec![1.0; n]
    }

    #[test]
    fn collapse_without_ties_sorts_only() {
        let c = collapse_ties(&[1.0, 2.0, 3.0], &[5.0, 6.0, 7.0], &ones(3)).unwrap();
        assert_eq!(c.knots, vec![1.0, 2.0, 3.0]);
        assert_eq!(c.values, vec![5.0, 6.0, 7.0]);
        assert_eq!(c.weights, ones(3));

        let c = collapse_ties(&[2.0, 1.0], &[-4.0, 9.0], &ones(2)).unwrap();
        assert_eq!(c.knots, vec![1.0, 2.0]);
        assert_eq!(c.values, vec![9.0, -4.0]);
    }

    #[test]
    fn collapse_pools_ties_by_weighted_mean() {
        let c = collapse_ties(&[1.0, 1.0], &[0.0, 2.0], &[1.0, 3.0]).unwrap();
        assert_eq!(c.knots, vec![1.0]);
        assert_eq!(c.values, vec![1.5]);
        assert_eq!(c.weights, vec![4.0]);
    }

    #[test]
    fn collapse_errors() {
        assert!(matches!(
            collapse_ties(&[1.0, f64::NAN], &[0.0, 0.0], &ones(2)),
            Err(Error::NonFiniteInput(_))
        ));
        assert!(matches!(
            collapse_ties(&[1.0, 2.0], &[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::NonPositiveWeight(1))
        ));
    }

    #[test]
    fn monotone_input_is_identity() {
        let f = fit_isotonic(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0], &ones(3)).unwrap();
        assert_eq!(f.values(), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn single_violation_pools() {
        let f = fit_isotonic(&[0.0, 1.0, 2.0], &[1.0, 2.0, 1.0], &ones(3)).unwrap();
        assert_eq!(f.values(), &[1.0, 1.5, 1.5]);
    }

    #[test]
    fn weighted_pool() {
        let f = fit_isotonic(&[0.0, 1.0], &[3.0, 1.0], &[1.0, 3.0]).unwrap();
        assert_eq!(f.values(), &[1.5, 1.5]);
    }

    #[test]
    fn rejects_unsorted_knots() {
        assert!(matches!(
            fit_isotonic(&[0.0, 0.0], &[1.0, 2.0], &ones(2)),
            Err(Error::UnsortedKnots(1))
        ));
    }

    #[test]
    fn evaluation_rule() {
        let f = StepFit::from_parts(vec![0.0, 1.0], vec![0.0, 2.0], ones(2)).unwrap();
        assert_eq!(f.evaluate(0.5), 1.0);
        assert_eq!(f.evaluate(-5.0), 0.0);
        assert_eq!(f.evaluate(7.0), 2.0);
        assert_eq!(f.evaluate(1.0), 2.0);
        let g = StepFit::from_parts(vec![0.1, 0.3, 0.7], vec![-1.0, 0.25, 4.0], ones(3)).unwrap();
        assert_eq!(g.evaluate(0.3), 0.25);
        assert_eq!(g.evaluate(0.7), 4.0);
        let single = StepFit::from_parts(vec![3.0], vec![1.25], ones(1)).unwrap();
        assert_eq!(single.evaluate(-1e9), 1.25);
        assert_eq!(single.evaluate(1e9), 1.25);
    }

    #[test]
    fn deserialization_validates() {
        let ok = r#"{"knots":[0,1],"values":[0,1],"weights":[1,1]}"#;
        assert!(serde_json::from_str::<StepFit>(ok).is_ok());
        let bad = r#"{"knots":[0,1],"values":[1,0],"weights":[1,1]}"#;
        assert!(serde_json::from_str::<StepFit>(bad).is_err());
        let unsorted = r#"{"knots":[1,0],"values":[0,1],"weights":[1,1]}"#;
        assert!(serde_json::from_str::<StepFit>(unsorted).is_err());
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..40).prop_flat_map(|n| {
            (
                proptest::collection::vec(-100.0f64..100.0, n),
                proptest::collection::vec(0.01f64..10.0, n),
            )
        })
    }

    fn knots(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64).collect()
    }

    proptest! {
        #[test]
        fn output_is_monotone_and_in_range((y, w) in instance()) {
            let f = fit_isotonic(&knots(y.len()), &y, &w).unwrap();
            let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for p in f.values().windows(2) {
                prop_assert!(p[0] <= p[1]);
            }
            for &v in f.values() {
                prop_assert!(lo <= v && v <= hi);
            }
        }

        #[test]
        fn idempotent((y, w) in instance()) {
            let k = knots(y.len());
            let f = fit_isotonic(&k, &y, &w).unwrap();
            let g = fit_isotonic(&k, f.values(), &w).unwrap();
            prop_assert_eq!(f.values(), g.values());
        }

        #[test]
        fn preserves_weighted_mean((y, w) in instance()) {
            let f = fit_isotonic(&knots(y.len()), &y, &w).unwrap();
            let r: f64 = y.iter().zip(f.values()).zip(&w).map(|((a, b), w)| w * (a - b)).sum();
            let scale: f64 = y.iter().zip(&w).map(|(a, w)| (w * a).abs()).sum::<f64>().max(1.0);
            prop_assert!(r.abs() <= 1e-10 * scale, "residual sum {}", r);
        }

        #[test]
        fn shift_and_scale_equivariant((y, w) in instance(), c in -50.0f64..50.0, s in 0.01f64..20.0) {
            let k = knots(y.len());
            let base = fit_isotonic(&k, &y, &w).unwrap();
            let shifted: Vec<f64> = y.iter().map(|v| v + c).collect();
            let scaled: Vec<f64> = y.iter().map(|v| v * s).collect();
            let fs = fit_isotonic(&k, &shifted, &w).unwrap();
            let fc = fit_isotonic(&k, &scaled, &w).unwrap();
            for i in 0..y.len() {
                prop_assert!((fs.values()[i] - base.values()[i] - c).abs() <= 1e-10 * (1.0 + c.abs() + base.values()[i].abs()));
                prop_assert!((fc.values()[i] - s * base.values()[i]).abs() <= 1e-10 * (1.0 + (s * base.values()[i]).abs()));
            }
        }

        #[test]
        fn evaluation_is_monotone_in_query((y, w) in instance(), mut qs in proptest::collection::vec(-5.0f64..45.0, 1..50)) {
            let f = fit_isotonic(&knots(y.len()), &y, &w).unwrap();
            qs.sort_by(f64::total_cmp);
            let vals: Vec<f64> = qs.iter().map(|&q| f.evaluate(q)).collect();
            for p in vals.windows(2) {
                prop_assert!(p[0] <= p[1]);
            }
        }
    }
}
