//! Synthetic regression scenarios.
//!
//! Covariates are IID `Unif[0,1]^d` and noise is IID `N(0, σ²)`, drawn from
//! two independent ChaCha8 streams derived from the scenario seed, so changing
//! `noise_sd` never changes the covariates.
//!
//! Piecewise definitions use intervals closed on the left and open on the
//! right, except the last one, which also contains 1.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::DataSet;
use crate::decomp::Shape;
use crate::error::{Error, Result};
use crate::rng;

const STREAM_X: u64 = 0x5843_4f56; // "XCOV"
const STREAM_NOISE: u64 = 0x4e4f_4953; // "NOIS"

fn check_unit(function: &'static str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain { function, value: x })
    }
}

/// Segment index of `x` among `m` equal segments of `[0, 1]`.
fn segment(x: f64, m: usize) -> usize {
    ((x * m as f64).floor() as usize).min(m - 1)
}

/// Triangle wave: 1 at 0, 0 at 1/3, 1 at 2/3, 0 at 1. 3-Lipschitz.
pub fn f1(x: f64) -> Result<f64> {
    check_unit("f1", x)?;
    Ok(if x < 1.0 / 3.0 {
        1.0 - 3.0 * x
    } else if x < 2.0 / 3.0 {
        -1.0 + 3.0 * x
    } else {
        3.0 - 3.0 * x
    })
}

/// Staircase with levels `1..=m` on equal segments, plus `beta·x`.
pub fn f2(x: f64, m: usize, beta: f64) -> Result<f64> {
    check_unit("f2", x)?;
    if m == 0 {
        return Err(Error::InvalidSpec("f2 needs m >= 1".into()));
    }
    Ok((segment(x, m) + 1) as f64 + beta * x)
}

pub fn f3(x: f64, gamma: f64) -> Result<f64> {
    check_unit("f3", x)?;
    Ok((gamma * (2.0 * x - 1.0)).sin())
}

/// Convex piecewise-linear `C_m` (slopes −1, 0, 1, …, m−2 on equal segments,
/// `C_m(0) = 0`) plus `beta·x²`.
pub fn f4(x: f64, m: usize, beta: f64) -> Result<f64> {
    check_unit("f4", x)?;
    if m == 0 {
        return Err(Error::InvalidSpec("f4 needs m >= 1".into()));
    }
    let k = segment(x, m);
    let width = 1.0 / m as f64;
    // Sum of the slopes −1..k−2 of the completed segments.
    let completed = (k * k) as f64 / 2.0 - 1.5 * k as f64;
    let slope = k as f64 - 1.0;
    Ok(completed * width + slope * (x - k as f64 * width) + beta * x * x)
}

/// Named scenarios: four univariate ones and four additive ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum ScenarioId {
    S1,
    S2,
    S3,
    S4,
    #[serde(rename = "A1_2d")]
    A1_2d,
    #[serde(rename = "A2_2d")]
    A2_2d,
    #[serde(rename = "A3_5d")]
    A3_5d,
    #[serde(rename = "A4_5d")]
    A4_5d,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 8] = [
        ScenarioId::S1,
        ScenarioId::S2,
        ScenarioId::S3,
        ScenarioId::S4,
        ScenarioId::A1_2d,
        ScenarioId::A2_2d,
        ScenarioId::A3_5d,
        ScenarioId::A4_5d,
    ];

    pub fn dim(self) -> usize {
        match self {
            ScenarioId::S1 | ScenarioId::S2 | ScenarioId::S3 | ScenarioId::S4 => 1,
            ScenarioId::A1_2d | ScenarioId::A2_2d => 2,
            ScenarioId::A3_5d | ScenarioId::A4_5d => 5,
        }
    }

    pub fn is_additive(self) -> bool {
        self.dim() > 1
    }

    /// Shape used to fit this scenario (additive scenarios use monotone components).
    pub fn shape(self) -> Shape {
        match self {
            ScenarioId::S3 | ScenarioId::S4 => Shape::Convex,
            _ => Shape::Monotone,
        }
    }

    /// Stable numeric tag used in seed derivation.
    pub fn code(self) -> u64 {
        self as u64 + 1
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::S1 => "S1",
            ScenarioId::S2 => "S2",
            ScenarioId::S3 => "S3",
            ScenarioId::S4 => "S4",
            ScenarioId::A1_2d => "A1_2d",
            ScenarioId::A2_2d => "A2_2d",
            ScenarioId::A3_5d => "A3_5d",
            ScenarioId::A4_5d => "A4_5d",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioId::ALL
            .into_iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidSpec(format!("unknown scenario `{s}`")))
    }
}

/// Full description of a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    /// Segment count for S2/S4.
    pub m: usize,
    /// Linear (S2) or quadratic (S4) coefficient.
    pub beta: f64,
    /// Frequency for S3.
    pub gamma: f64,
    pub noise_sd: f64,
    pub n: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Defaults: m = 3, β = 1, γ = 4, σ = 0.1.
    pub fn new(id: ScenarioId, n: usize, seed: u64) -> Self {
        Self {
            id,
            m: 3,
            beta: 1.0,
            gamma: 4.0,
            noise_sd: 0.1,
            n,
            seed,
        }
    }

    pub fn with_m(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_noise_sd(mut self, sd: f64) -> Self {
        self.noise_sd = sd;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidSpec("n must be at least 1".into()));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "noise_sd {} must be finite and non-negative",
                self.noise_sd
            )));
        }
        if matches!(self.id, ScenarioId::S2 | ScenarioId::S4) && self.m == 0 {
            return Err(Error::InvalidSpec("m must be at least 1".into()));
        }
        if !self.beta.is_finite() || !self.gamma.is_finite() {
            return Err(Error::InvalidSpec("beta and gamma must be finite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.id.dim()
    }

    /// The regression function at `x`.
    pub fn truth(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        match self.id {
            ScenarioId::S1 => f1(x[0]),
            ScenarioId::S2 => f2(x[0], self.m, self.beta),
            ScenarioId::S3 => f3(x[0], self.gamma),
            ScenarioId::S4 => f4(x[0], self.m, self.beta),
            id => additive_truth(id, x),
        }
    }
}

/// The additive scenarios' regression functions.
pub fn additive_truth(id: ScenarioId, x: &[f64]) -> Result<f64> {
    if x.len() != id.dim() {
        return Err(Error::DimensionMismatch {
            expected: id.dim(),
            found: x.len(),
        });
    }
    match id {
        ScenarioId::A1_2d => Ok(f1(x[0])? - f1(x[1])?),
        ScenarioId::A2_2d => Ok(f2(x[0], 3, 1.0)? - f2(x[1], 3, 1.0)?),
        ScenarioId::A3_5d => Ok(f1(x[0])? - f1(x[1])? + x[2] - x[3] + 1.0),
        ScenarioId::A4_5d => Ok(f2(x[0], 1, 0.0)?
            + f2(1.0 - x[1], 3, 3.0)?
            + f2(x[2], 3, 3.0)?
            + f2(1.0 - x[3], 1, 3.0)?
            + f2(x[4], 1, 3.0)?),
        other => Err(Error::InvalidSpec(format!("{other} is not an additive scenario"))),
    }
}

/// Draws `n` uniform points in `[0,1]^d` from `seed`.
pub fn uniform_design(n: usize, d: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::seeded(seed);
    (0..n * d).map(|_| rng::uniform(&mut r)).collect()
}

pub fn generate(spec: &ScenarioSpec) -> Result<DataSet> {
    spec.validate()?;
    let d = spec.dim();
    let x = uniform_design(spec.n, d, rng::derive_seed(spec.seed, &[STREAM_X]));
    let mut noise = rng::seeded(rng::derive_seed(spec.seed, &[STREAM_NOISE]));
    let y = x
        .chunks_exact(d)
        .map(|row| {
            let eps = rng::standard_normal(&mut noise);
            Ok(spec.truth(row)? + spec.noise_sd * eps)
        })
        .collect::<Result<Vec<_>>>()?;
    DataSet::new(x, y, d)
}
