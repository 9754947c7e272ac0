use std::path::PathBuf;

use thiserror::Error;

use crate::data::CivilDate;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{file}:{line}:{column}: {message}")]
    Schema {
        file: String,
        line: u64,
        column: u64,
        message: String,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(
        "feature order mismatch at position {position}: model expects `{expected}`, got `{found}`"
    )]
    FeatureOrderMismatch {
        position: usize,
        expected: String,
        found: String,
    },
    #[error("unknown station id `{0}`")]
    UnknownStation(String),
    #[error("unknown pollutant `{0}` (valid: PM10, PM25, NO2, SO2, O3)")]
    UnknownPollutant(String),
    #[error("unmapped land-cover class {0}")]
    UnknownClass(i64),
    #[error("point ({x}, {y}) lies outside the grid extent")]
    OutOfExtent { x: f64, y: f64 },
    #[error("weather series has no row for {0}")]
    Gap(CivilDate),
    #[error("value out of domain: {0}")]
    Domain(String),
    #[error("series has no observed value")]
    AllMissing,
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("every actual value is ~0; MAPE undefined")]
    AllExcluded,
    #[error("cross-validation needs at least 2 distinct years, found {0}")]
    InsufficientYears(usize),
    #[error("results table is missing cells: {}", .0.join(", "))]
    MissingCell(Vec<String>),
    #[error("no valid sample could be built for {0}")]
    EmptyOutput(String),
    #[error("SGD diverged at epoch {epoch}, step {step}: loss is not finite")]
    Divergence { epoch: usize, step: usize },
    #[error("invalid learner configuration: {0}")]
    InvalidConfig(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unsupported model format version {0}")]
    Version(u32),
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn schema(file: &str, line: u64, column: u64, message: impl Into<String>) -> Self {
        Error::Schema {
            file: file.to_string(),
            line,
            column,
            message: message.into(),
        }
    }

    /// Whether the failure stems from the run configuration rather than the data.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidConfig(_) | Error::UnknownPollutant(_)
        )
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Schema { .. } => "SchemaError",
            Error::Parse { .. } => "ParseError",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::FeatureOrderMismatch { .. } => "FeatureOrderMismatch",
            Error::UnknownStation(_) => "UnknownStation",
            Error::UnknownPollutant(_) => "UnknownPollutant",
            Error::UnknownClass(_) => "UnknownClass",
            Error::OutOfExtent { .. } => "OutOfExtent",
            Error::Gap(_) => "GapError",
            Error::Domain(_) => "DomainError",
            Error::AllMissing => "AllMissing",
            Error::EmptyInput => "EmptyInput",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::AllExcluded => "AllExcluded",
            Error::InsufficientYears(_) => "InsufficientYears",
            Error::MissingCell(_) => "MissingCell",
            Error::EmptyOutput(_) => "EmptyOutput",
            Error::Divergence { .. } => "DivergenceError",
            Error::InvalidConfig(_) => "ConfigError",
            Error::Config(_) => "ConfigError",
            Error::Version(_) => "VersionError",
            Error::CorruptModel(_) => "CorruptModel",
            Error::Io { .. } => "IoError",
        }
    }
}
