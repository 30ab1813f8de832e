//! Candidate penalty scales.
//!
//! Text grammar:
//!
//! ```text
//! log:<lo>:<hi>:<count>     count log-spaced values from lo to hi (lo > 0)
//! list:<v1>,<v2>,...        explicit values
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite list of candidate penalty vectors, all of the same dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaGrid {
    values: Vec<Vec<f64>>,
    /// Enables a golden-section search around the best grid value.
    pub refine: bool,
}

impl AlphaGrid {
    pub fn new(values: Vec<Vec<f64>>, refine: bool) -> Result<Self> {
        let first = values.first().ok_or(Error::EmptyGrid)?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidGrid("zero-dimensional candidate".into()));
        }
        for v in &values {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            if let Some(a) = v.iter().find(|a| !a.is_finite() || **a < 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "candidate {a} must be finite and non-negative"
                )));
            }
        }
        Ok(Self { values, refine })
    }

    /// One-dimensional grid from scalar candidates.
    pub fn scalar(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&a| vec![a]).collect(), false)
    }

    /// `count` log-spaced values on `[lo, hi]`.
    pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo > 0.0 && lo.is_finite() && hi.is_finite() && hi >= lo) {
            return Err(Error::InvalidGrid(format!(
                "log grid needs 0 < lo <= hi, got lo={lo}, hi={hi}"
            )));
        }
        if count == 0 {
            return Err(Error::EmptyGrid);
        }
        let (a, b) = (lo.ln(), hi.ln());
        let vals: Vec<f64> = (0..count)
            .map(|i| {
                if i == 0 {
                    lo
                } else if i == count - 1 {
                    hi
                } else {
                    (a + (b - a) * i as f64 / (count - 1) as f64).exp()
                }
            })
            .collect();
        Self::scalar(&vals)
    }

    /// Sixteen log-spaced values from 0.01 to 100, plus zero.
    pub fn default_grid() -> Self {
        Self::log_spaced(1e-2, 1e2, 16)
            .expect("valid constant grid")
            .with_zero()
    }

    /// Prepends the all-zero candidate if it is not already present.
    pub fn with_zero(mut self) -> Self {
        let zero = vec![0.0; self.dim()];
        if !self.values.contains(&zero) {
            self.values.insert(0, zero);
        }
        self
    }

    pub fn with_refine(mut self, refine: bool) -> Self {
        self.refine = refine;
        self
    }

    /// Parses the text grammar and optionally prepends zero.
    pub fn parse(spec: &str, include_zero: bool) -> Result<Self> {
        let grid: Self = spec.parse()?;
        Ok(if include_zero { grid.with_zero() } else { grid })
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    /// Expands a one-dimensional grid to `d` equal components; other grids must already match `d`.
    pub fn replicate(&self, d: usize) -> Result<Self> {
        match self.dim() {
            k if k == d => Ok(self.clone()),
            1 => Self::new(
                self.values.iter().map(|v| vec![v[0]; d]).collect(),
                self.refine,
            ),
            k => Err(Error::DimensionMismatch { expected: d, found: k }),
        }
    }

    /// True when every candidate has all components equal.
    pub fn is_isotropic(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|a| *a == v[0]))
    }
}

impl FromStr for AlphaGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let num = |t: &str| -> Result<f64> {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidGrid(format!("`{t}` is not a number")))
        };
        if let Some(rest) = s.strip_prefix("log:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 3 {
                return Err(Error::InvalidGrid(format!(
                    "expected log:<lo>:<hi>:<count>, got `{s}`"
                )));
            }
            let count = parts[2]
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidGrid(format!("`{}` is not a count", parts[2])))?;
            if count > 100_000 {
                return Err(Error::InvalidGrid(format!("count {count} is too large")));
            }
            Self::log_spaced(num(parts[0])?, num(parts[1])?, count)
        } else if let Some(rest) = s.strip_prefix("list:") {
            let vals = rest.split(',').map(num).collect::<Result<Vec<_>>>()?;
            Self::scalar(&vals)
        } else {
            Err(Error::InvalidGrid(format!(
                "`{s}` does not start with `log:` or `list:`"
            )))
        }
    }
}

impl fmt::Display for AlphaGrid {
    /// Renders one-dimensional grids as a `list:` spec that parses back exactly.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "list:")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            let comps: Vec<String> = v.iter().map(|a| format!("{a:?}")).collect();
            write!(f, "{}", comps.join(";"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_shape() {
        let g = AlphaGrid::default_grid();
        assert_eq!(g.len(), 17);
        assert_eq!(g.values()[0], vec![0.0]);
        assert_eq!(g.values()[1], vec![1e-2]);
        assert_eq!(g.values()[16], vec![1e2]);
        let mid = g.values()[1..].windows(2).map(|p| p[1][0] / p[0][0]);
        for r in mid {
            assert!((r - 10f64.powf(4.0 / 15.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn parse_grammar() {
        let g = AlphaGrid::parse("log:1e-2:1e2:16", true).unwrap();
        assert_eq!(g, AlphaGrid::default_grid());
        let l = AlphaGrid::parse("list:3, 6,0.1", false).unwrap();
        assert_eq!(l.values(), &[vec![3.0], vec![6.0], vec![0.1]]);
        let z = AlphaGrid::parse("list:0,1", true).unwrap();
        assert_eq!(z.len(), 2);
    }

    #[test]
    fn parse_errors() {
        for bad in ["", "log:1:2", "log:a:2:3", "log:0:1:4", "log:2:1:3", "list:", "list:1,x", "list:-1", "grid:1", "log:1:2:0", "list:nan"] {
            assert!(AlphaGrid::parse(bad, true).is_err(), "{bad}");
        }
    }

    #[test]
    fn display_round_trips() {
        let g = AlphaGrid::default_grid();
        let back = AlphaGrid::parse(&g.to_string(), false).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn replicate_scalar_grid() {
        let g = AlphaGrid::scalar(&[0.0, 2.0]).unwrap().replicate(3).unwrap();
        assert_eq!(g.values()[1], vec![2.0; 3]);
        assert!(g.is_isotropic());
        assert!(g.replicate(2).is_err());
        assert!(AlphaGrid::new(vec![], false).is_err());
        assert!(AlphaGrid::new(vec![vec![1.0], vec![1.0, 2.0]], false).is_err());
    }
}
