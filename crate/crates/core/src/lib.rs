//! Next-day forecasting of urban air pollutant concentrations from satellite
//! observations, weather and terrain.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the pipeline and CLI use.

// `!(a <= b)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cv;
pub mod data;
pub mod error;
pub mod features;
pub mod fixtures;
pub mod ingest;
pub mod metrics;
pub mod models;
pub mod raster;
pub mod scalar;
pub mod validate;

pub use data::{CivilDate, DailySeries, Measurement, Pollutant, Quality, Station};
pub use error::{Error, Result};
pub use models::{ForecastModel, LearnerConfig, ModelKind};
pub use scalar::Scalar;

pub type Grid = raster::RasterGrid<f64>;
pub type Series = data::DailySeries<f64>;
pub type Model = models::ForecastModel<f64>;
pub type Norm = features::Normalizer<f64>;
pub type Tree = models::RegressionTree<f64>;
pub type Gbt = models::GbtModel<f64>;
pub type Linear = models::LinearModel<f64>;
