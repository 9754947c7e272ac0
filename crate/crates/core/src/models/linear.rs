//! Linear regressors: ordinary least squares and stochastic gradient descent.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::check_design;
use super::linalg::{lstsq_min_norm, ColMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LinearModel<T> {
    pub weights: Vec<T>,
    pub intercept: T,
}

impl<T: Scalar> LinearModel<T> {
    pub fn zeros(n: usize) -> Self {
        LinearModel {
            weights: vec![T::zero(); n],
            intercept: T::zero(),
        }
    }

    pub fn predict_one(&self, x: &[T]) -> T {
        self.weights
            .iter()
            .zip(x)
            .fold(self.intercept, |acc, (&w, &v)| acc + w * v)
    }
}

/// Least squares with intercept. Columns are centered first, so the
/// intercept is unpenalized and the weights are the minimum-norm solution.
pub fn fit_ols<T: Scalar, R: AsRef<[T]>>(x: &[R], y: &[T]) -> Result<LinearModel<T>> {
    let p = check_design(x, y)?;
    let n = x.len();
    let nt = T::of_usize(n);
    let mut means = vec![T::zero(); p];
    for row in x {
        for (m, &v) in means.iter_mut().zip(row.as_ref()) {
            *m = *m + v;
        }
    }
    for m in &mut means {
        *m = *m / nt;
    }
    let y_mean = y.iter().fold(T::zero(), |a, &b| a + b) / nt;
    let centered: Vec<Vec<T>> = x
        .iter()
        .map(|r| {
            r.as_ref()
                .iter()
                .zip(&means)
                .map(|(&v, &m)| v - m)
                .collect()
        })
        .collect();
    let yc: Vec<T> = y.iter().map(|&v| v - y_mean).collect();
    let weights = lstsq_min_norm(&ColMatrix::from_rows(&centered), &yc);
    let intercept = weights
        .iter()
        .zip(&means)
        .fold(y_mean, |acc, (&w, &m)| acc - w * m);
    Ok(LinearModel { weights, intercept })
}

/// Stochastic gradient descent settings.
///
/// The step size at global update `k` is `initial_rate / (1 + k * 1e-4)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdConfig {
    pub initial_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            initial_rate: 0.01,
            epochs: 200,
            l2: 0.0,
            seed: 0,
        }
    }
}

pub const SGD_DECAY: f64 = 1e-4;

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_rate > 0.0 && self.initial_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sgd initial_rate must be > 0, got {}",
                self.initial_rate
            )));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sgd l2 must be >= 0, got {}",
                self.l2
            )));
        }
        Ok(())
    }

    pub fn rate_at(&self, step: u64) -> f64 {
        self.initial_rate / (1.0 + step as f64 * SGD_DECAY)
    }
}

/// Per-sample objective `0.5 * (w.x + b - y)^2 + 0.5 * l2 * |w|^2`.
pub fn sgd_sample_loss<T: Scalar>(model: &LinearModel<T>, x: &[T], y: T, l2: T) -> T {
    let r = model.predict_one(x) - y;
    let half = T::of(0.5);
    let reg = model.weights.iter().fold(T::zero(), |a, &w| a + w * w);
    half * r * r + half * l2 * reg
}

/// Gradient of [`sgd_sample_loss`] with respect to `(weights, intercept)`.
pub fn sgd_sample_gradient<T: Scalar>(model: &LinearModel<T>, x: &[T], y: T, l2: T) -> (Vec<T>, T) {
    let r = model.predict_one(x) - y;
    let gw = model
        .weights
        .iter()
        .zip(x)
        .map(|(&w, &v)| r * v + l2 * w)
        .collect();
    (gw, r)
}

pub fn fit_sgd<T: Scalar, R: AsRef<[T]>>(
    x: &[R],
    y: &[T],
    cfg: &SgdConfig,
) -> Result<LinearModel<T>> {
    cfg.validate()?;
    let p = check_design(x, y)?;
    let mut model = LinearModel::zeros(p);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..x.len()).collect();
    let l2 = T::of(cfg.l2);
    let mut step: u64 = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for (k, &i) in order.iter().enumerate() {
            let row = x[i].as_ref();
            let r = model.predict_one(row) - y[i];
            if !r.is_finite() {
                return Err(Error::Divergence { epoch, step: k });
            }
            let eta = T::of(cfg.rate_at(step));
            for (w, &v) in model.weights.iter_mut().zip(row) {
                *w = *w - eta * (r * v + l2 * *w);
            }
            model.intercept = model.intercept - eta * r;
            if !model.intercept.is_finite() {
                return Err(Error::Divergence { epoch, step: k });
            }
            step += 1;
        }
    }
    if model.weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Divergence {
            epoch: cfg.epochs,
            step: 0,
        });
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_exact_line() {
        let x: Vec<[f64; 1]> = (0..10).map(|i| [i as f64 * 0.7 - 2.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0] + 1.0).collect();
        let m = fit_ols(&x, &y).unwrap();
        assert!((m.weights[0] - 2.0).abs() < 1e-10);
        assert!((m.intercept - 1.0).abs() < 1e-10);
        assert!((m.predict_one(&[5.0]) - 11.0).abs() < 1e-10);
    }

    #[test]
    fn ols_single_sample() {
        let m = fit_ols(&[[3.0, -1.0]], &[7.5]).unwrap();
        assert_eq!(m.predict_one(&[3.0, -1.0]), 7.5);
    }

    #[test]
    fn ols_dimension_mismatch() {
        let x = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(matches!(
            fit_ols(&x, &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            fit_ols(&[[1.0]], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ols_f32() {
        let x: Vec<[f32; 1]> = (0..8).map(|i| [i as f32]).collect();
        let y: Vec<f32> = x.iter().map(|r| 2.0 * r[0] + 1.0).collect();
        let m = fit_ols(&x, &y).unwrap();
        assert!((m.weights[0] - 2.0).abs() < 1e-4);
    }

    #[test]
    fn sgd_zero_epochs() {
        let cfg = SgdConfig {
            epochs: 0,
            ..Default::default()
        };
        let m = fit_sgd(&[[1.0, 2.0], [3.0, 4.0]], &[1.0, 2.0], &cfg).unwrap();
        assert_eq!(m, LinearModel::zeros(2));
        assert_eq!(m.predict_one(&[5.0, 6.0]), 0.0);
    }

    #[test]
    fn sgd_diverges_with_huge_rate() {
        let x: Vec<[f64; 1]> = (0..20).map(|i| [i as f64 / 19.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0]).collect();
        let cfg = SgdConfig {
            initial_rate: 1e6,
            ..Default::default()
        };
        assert!(matches!(
            fit_sgd(&x, &y, &cfg),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn sgd_rejects_bad_rate() {
        let cfg = SgdConfig {
            initial_rate: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            fit_sgd(&[[1.0]], &[1.0], &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }
}
