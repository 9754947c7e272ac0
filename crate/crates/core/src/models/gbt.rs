//! Gradient boosting with squared loss: start from the target mean, then fit
//! each new tree to the current residuals and add it with a shrinkage factor.

use serde::{Deserialize, Serialize};

use super::check_design;
use super::tree::{fit_tree, shifted_mean, PresortedColumns, RegressionTree, TreeParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtConfig {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            n_trees: 200,
            learning_rate: 0.05,
            max_depth: 3,
            min_samples_leaf: 5,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("gbt n_trees must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gbt learning_rate must be in (0,1], got {}",
                self.learning_rate
            )));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig(
                "gbt min_samples_leaf must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GbtModel<T> {
    pub base: T,
    pub trees: Vec<RegressionTree<T>>,
    /// Shrinkage applied to each tree's output.
    pub scales: Vec<T>,
}

impl<T: Scalar> GbtModel<T> {
    pub fn predict_one(&self, x: &[T]) -> T {
        self.predict_stages(x, self.trees.len())
    }

    /// Prediction using only the first `stages` trees.
    pub fn predict_stages(&self, x: &[T], stages: usize) -> T {
        self.trees
            .iter()
            .zip(&self.scales)
            .take(stages)
            .fold(self.base, |acc, (t, &s)| acc + s * t.predict_one(x))
    }
}

pub fn fit_gbt<T: Scalar, R: AsRef<[T]>>(x: &[R], y: &[T], cfg: &GbtConfig) -> Result<GbtModel<T>> {
    cfg.validate()?;
    check_design(x, y)?;
    if x.len() < 2 * cfg.min_samples_leaf {
        return Err(Error::InvalidConfig(format!(
            "gbt needs at least 2 * min_samples_leaf = {} samples, got {}",
            2 * cfg.min_samples_leaf,
            x.len()
        )));
    }
    let data = PresortedColumns::new(x);
    let base = shifted_mean(y.iter().copied());
    let mut residual: Vec<T> = y.iter().map(|&v| v - base).collect();
    let lr = T::of(cfg.learning_rate);
    let params = TreeParams {
        max_depth: cfg.max_depth,
        min_samples_leaf: cfg.min_samples_leaf,
    };
    let mut trees = Vec::with_capacity(cfg.n_trees);
    for _ in 0..cfg.n_trees {
        let tree = fit_tree(&data, &residual, params);
        for (i, r) in residual.iter_mut().enumerate() {
            *r = *r - lr * tree.predict_one(x[i].as_ref());
        }
        trees.push(tree);
    }
    Ok(GbtModel {
        base,
        scales: vec![lr; trees.len()],
        trees,
    })
}
