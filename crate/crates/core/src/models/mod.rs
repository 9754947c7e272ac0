//! The three regressors and the fitted-model container shared by them.

pub mod gbt;
pub mod linalg;
pub mod linear;
pub mod persist;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use gbt::{fit_gbt, GbtConfig, GbtModel};
pub use linear::{fit_ols, fit_sgd, sgd_sample_gradient, sgd_sample_loss, LinearModel, SgdConfig};
pub use persist::{load_model, save_model, FORMAT_VERSION};
pub use tree::{Node, RegressionTree};

use crate::data::Pollutant;
use crate::error::{Error, Result};
use crate::features::Normalizer;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ols,
    Sgd,
    Gbt,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Ols, ModelKind::Gbt, ModelKind::Sgd];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Ols => "ols",
            ModelKind::Sgd => "sgd",
            ModelKind::Gbt => "gbt",
        }
    }

    /// Label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Ols => "LR",
            ModelKind::Sgd => "SGDReg",
            ModelKind::Gbt => "GradBst",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ols" | "lr" | "linear" => Ok(ModelKind::Ols),
            "sgd" | "sgdreg" => Ok(ModelKind::Sgd),
            "gbt" | "gradbst" | "gbr" => Ok(ModelKind::Gbt),
            other => Err(Error::Config(format!(
                "unknown model kind `{other}` (valid: ols, sgd, gbt)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub sgd: SgdConfig,
    pub gbt: GbtConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", tag = "type", rename_all = "lowercase")]
pub enum Regressor<T> {
    Linear(LinearModel<T>),
    Boosted(GbtModel<T>),
}

impl<T: Scalar> Regressor<T> {
    pub fn predict_one(&self, x: &[T]) -> T {
        match self {
            Regressor::Linear(m) => m.predict_one(x),
            Regressor::Boosted(m) => m.predict_one(x),
        }
    }
}

/// A fitted per-pollutant forecaster: normalization plus regressor.
///
/// `predict` takes raw feature vectors laid out as `feature_names`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ForecastModel<T> {
    pub kind: ModelKind,
    pub pollutant: Pollutant,
    pub window: usize,
    pub feature_names: Vec<String>,
    pub normalizer: Normalizer<T>,
    pub regressor: Regressor<T>,
}

impl<T: Scalar> ForecastModel<T> {
    /// Fits the normalizer on `x`, then the learner on the normalized rows.
    pub fn fit<R: AsRef<[T]>>(
        kind: ModelKind,
        pollutant: Pollutant,
        window: usize,
        feature_names: Vec<String>,
        x: &[R],
        y: &[T],
        cfg: &LearnerConfig,
    ) -> Result<Self> {
        let p = check_design(x, y)?;
        if p != feature_names.len() {
            return Err(Error::DimensionMismatch {
                expected: feature_names.len(),
                found: p,
            });
        }
        let normalizer = Normalizer::fit(x)?;
        let scaled: Vec<Vec<T>> = x
            .iter()
            .map(|r| normalizer.apply(r.as_ref()))
            .collect::<Result<_>>()?;
        let regressor = match kind {
            ModelKind::Ols => Regressor::Linear(fit_ols(&scaled, y)?),
            ModelKind::Sgd => Regressor::Linear(fit_sgd(&scaled, y, &cfg.sgd)?),
            ModelKind::Gbt => Regressor::Boosted(fit_gbt(&scaled, y, &cfg.gbt)?),
        };
        Ok(ForecastModel {
            kind,
            pollutant,
            window,
            feature_names,
            normalizer,
            regressor,
        })
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn predict_one(&self, x: &[T]) -> Result<T> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: x.len(),
            });
        }
        let z = self.normalizer.apply(x)?;
        Ok(self.regressor.predict_one(&z))
    }

    pub fn predict<R: AsRef<[T]>>(&self, x: &[R]) -> Result<Vec<T>> {
        x.iter().map(|r| self.predict_one(r.as_ref())).collect()
    }

    /// Checks that `names` matches this model's feature layout exactly.
    pub fn check_layout(&self, names: &[String]) -> Result<()> {
        if names.len() != self.feature_names.len() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_names.len(),
                found: names.len(),
            });
        }
        for (i, (a, b)) in self.feature_names.iter().zip(names).enumerate() {
            if a != b {
                return Err(Error::FeatureOrderMismatch {
                    position: i,
                    expected: a.clone(),
                    found: b.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Validates a design matrix and returns its column count.
pub(crate) fn check_design<T, R: AsRef<[T]>>(x: &[R], y: &[T]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let p = x[0].as_ref().len();
    for r in x {
        if r.as_ref().len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: r.as_ref().len(),
            });
        }
    }
    Ok(p)
}
