//! Saved-model file format.

use serde::{Deserialize, Serialize};

use crate::additive::AdditiveFit;
use crate::decomp::{DecompFit, Predictor, SelectedModel};
use crate::error::{Error, Result};

/// Fitted estimator with the selection record it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Univariate(SelectedModel<DecompFit>),
    Additive(SelectedModel<AdditiveFit>),
}

impl ModelKind {
    pub fn dim(&self) -> usize {
        match self {
            Self::Univariate(m) => m.best.dim(),
            Self::Additive(m) => m.best.dim(),
        }
    }

    pub fn alpha(&self) -> Vec<f64> {
        match self {
            Self::Univariate(m) => m.alpha(),
            Self::Additive(m) => m.alpha(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(match self {
            Self::Univariate(m) => m.predict(x),
            Self::Additive(m) => m.predict(x),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub covariates: Vec<String>,
    pub response: String,
    pub model: ModelKind,
}

impl ModelFile {
    pub fn validate(&self) -> Result<()> {
        if self.covariates.len() != self.model.dim() {
            return Err(Error::InvalidModel(format!(
                "{} covariate names for a {}-dimensional model",
                self.covariates.len(),
                self.model.dim()
            )));
        }
        match &self.model {
            ModelKind::Univariate(m) => m.check_argmin(),
            ModelKind::Additive(m) => m.check_argmin(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Parses and validates a saved model.
pub fn decode_model_json(text: &str) -> Result<ModelFile> {
    let m: ModelFile = serde_json::from_str(text)?;
    m.validate()?;
    Ok(m)
}
