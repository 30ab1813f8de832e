//! Shape-restricted nonparametric regression.
//!
//! Fits `f(x) = g(x) − penalty(α, x)` where `g` is isotonic or convex, with
//! the penalty scale chosen on a held-out split, plus an additive variant
//! fitted by backfitting and a simulation harness for measuring rates.

pub mod additive;
pub mod bench;
pub mod convex;
pub mod data;
pub mod decomp;
pub mod error;
pub mod grid;
pub mod isotonic;
pub mod model;
pub mod rng;
pub mod simgen;

pub use additive::{backfit, select_alpha_additive, AdditiveFit, BackfitOptions};
pub use convex::{fit_convex_lse, PiecewiseLinearFit};
pub use data::{load_csv, read_csv, split, DataSet, SplitIndices};
pub use decomp::{fit_for_alpha, select_alpha, DecompFit, Predictor, SelectedModel, Shape};
pub use error::{Error, Result};
pub use grid::AlphaGrid;
pub use isotonic::{fit_isotonic, StepFit};
pub use model::{decode_model_json, ModelFile, ModelKind};
pub use simgen::{generate, ScenarioId, ScenarioSpec};
