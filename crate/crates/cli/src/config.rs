//! Run configuration: one JSON document, paths relative to its directory,
//! with `AIRQ_*` environment variables overriding individual input paths.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use airq_core::ingest::{DatasetPaths, SatelliteSource};
use airq_core::{CivilDate, Error, LearnerConfig, ModelKind, Pollutant, Result};

/// Environment variables that override path entries of `data`.
pub const PATH_OVERRIDES: [(&str, &str); 9] = [
    ("AIRQ_STATIONS", "stations"),
    ("AIRQ_POLLUTION", "pollution"),
    ("AIRQ_WEATHER", "weather"),
    ("AIRQ_SATELLITE_CSV", "satellite_csv"),
    ("AIRQ_SATELLITE_RASTERS", "satellite_rasters"),
    ("AIRQ_DEM", "dem"),
    ("AIRQ_LANDCOVER", "landcover"),
    ("AIRQ_CLASSMAP", "classmap"),
    ("AIRQ_OUTPUT_DIR", "output_dir"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub stations: PathBuf,
    pub pollution: PathBuf,
    pub weather: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub satellite_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub satellite_rasters: Option<PathBuf>,
    pub dem: PathBuf,
    pub landcover: PathBuf,
    pub classmap: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub pollutant: String,
    pub model: String,
    pub w: usize,
    /// `[xmin, ymin, xmax, ymax]` in the raster CRS.
    pub bbox: [f64; 4],
    #[serde(default = "default_cell_size")]
    pub cell_size: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<CivilDate>,
}

fn default_cell_size() -> f64 {
    500.0
}

fn default_pollutants() -> Vec<String> {
    Pollutant::ALL.iter().map(|p| p.to_string()).collect()
}

fn default_models() -> Vec<String> {
    ModelKind::ALL.iter().map(|k| k.to_string()).collect()
}

fn default_windows() -> Vec<usize> {
    vec![1, 7, 14]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// The config file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub data: DataConfig,
    #[serde(default = "default_pollutants")]
    pub pollutants: Vec<String>,
    #[serde(default = "default_models")]
    pub models: Vec<String>,
    #[serde(default = "default_windows")]
    pub windows: Vec<usize>,
    #[serde(default)]
    pub learners: LearnerConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Parallel jobs; 0 means one per core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predict_date: Option<CivilDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub pollutant: Pollutant,
    pub model: ModelKind,
    pub w: usize,
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
    pub cell_size: f64,
    pub date: Option<CivilDate>,
}

/// A validated configuration with absolute paths and parsed names.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub paths: DatasetPaths,
    pub raster_dir: Option<PathBuf>,
    pub pollutants: Vec<Pollutant>,
    pub models: Vec<ModelKind>,
    pub windows: Vec<usize>,
    pub learners: LearnerConfig,
    pub output_dir: PathBuf,
    pub model_dir: PathBuf,
    pub seed: u64,
    pub workers: usize,
    pub predict_date: Option<CivilDate>,
    pub grid: Option<GridSpec>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn parse_all<T: std::str::FromStr<Err = Error>>(names: &[String]) -> Result<Vec<T>> {
    names.iter().map(|n| n.parse()).collect()
}

impl RunConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    /// Applies environment overrides, resolves relative paths against
    /// `base` and checks every setting.
    pub fn resolve(
        mut self,
        base: &Path,
        env: impl Fn(&str) -> Option<String>,
    ) -> Result<RunConfig> {
        for (var, key) in PATH_OVERRIDES {
            let Some(v) = env(var) else { continue };
            let v = PathBuf::from(v);
            let v = std::env::current_dir()
                .map(|cwd| resolve(&cwd, &v))
                .unwrap_or(v);
            let d = &mut self.data;
            match key {
                "stations" => d.stations = v,
                "pollution" => d.pollution = v,
                "weather" => d.weather = v,
                "satellite_csv" => d.satellite_csv = Some(v),
                "satellite_rasters" => d.satellite_rasters = Some(v),
                "dem" => d.dem = v,
                "landcover" => d.landcover = v,
                "classmap" => d.classmap = v,
                _ => self.output_dir = v,
            }
        }
        let d = &self.data;
        let raster_dir = d.satellite_rasters.as_deref().map(|p| resolve(base, p));
        let satellite = match (&d.satellite_csv, &raster_dir) {
            (Some(csv), _) => SatelliteSource::Csv(resolve(base, csv)),
            (None, Some(dir)) => SatelliteSource::Rasters(dir.clone()),
            (None, None) => {
                return Err(Error::Config(
                    "data needs `satellite_csv` or `satellite_rasters`".into(),
                ))
            }
        };
        let paths = DatasetPaths {
            stations: resolve(base, &d.stations),
            pollution: resolve(base, &d.pollution),
            weather: resolve(base, &d.weather),
            satellite,
            dem: resolve(base, &d.dem),
            landcover: resolve(base, &d.landcover),
            classmap: resolve(base, &d.classmap),
        };
        let mut inputs = vec![
            &paths.stations,
            &paths.pollution,
            &paths.weather,
            &paths.dem,
            &paths.landcover,
            &paths.classmap,
        ];
        match &paths.satellite {
            SatelliteSource::Csv(p) | SatelliteSource::Rasters(p) => inputs.push(p),
        }
        for p in inputs {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "input {} does not exist",
                    p.display()
                )));
            }
        }

        let pollutants: Vec<Pollutant> = parse_all(&self.pollutants)?;
        let models: Vec<ModelKind> = parse_all(&self.models)?;
        if pollutants.is_empty() || models.is_empty() || self.windows.is_empty() {
            return Err(Error::Config(
                "pollutants, models and windows must be non-empty".into(),
            ));
        }
        if let Some(w) = self.windows.iter().find(|&&w| w == 0) {
            return Err(Error::Config(format!(
                "window lengths must be >= 1, got {w}"
            )));
        }
        let mut learners = self.learners;
        learners.sgd.seed = self.seed;
        learners.sgd.validate()?;
        learners.gbt.validate()?;

        let grid = self
            .grid
            .map(|g| {
                let [xmin, ymin, xmax, ymax] = g.bbox;
                if !(xmax > xmin && ymax > ymin) {
                    return Err(Error::Config(format!("grid bbox {:?} has no area", g.bbox)));
                }
                if !(g.cell_size > 0.0) {
                    return Err(Error::Config(format!(
                        "grid cell_size must be > 0, got {}",
                        g.cell_size
                    )));
                }
                if g.w == 0 {
                    return Err(Error::Config("grid w must be >= 1".into()));
                }
                Ok(GridSpec {
                    pollutant: g.pollutant.parse()?,
                    model: g.model.parse()?,
                    w: g.w,
                    xmin,
                    ymin,
                    xmax,
                    ymax,
                    cell_size: g.cell_size,
                    date: g.date,
                })
            })
            .transpose()?;

        let output_dir = resolve(base, &self.output_dir);
        let model_dir = match &self.model_dir {
            Some(m) => resolve(base, m),
            None => output_dir.join("models"),
        };
        Ok(RunConfig {
            paths,
            raster_dir,
            pollutants,
            models,
            windows: self.windows,
            learners,
            output_dir,
            model_dir,
            seed: self.seed,
            workers: self.workers,
            predict_date: self.predict_date,
            grid,
        })
    }
}

impl RunConfig {
    /// Reads and resolves `path` using the process environment.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let base = if base.as_os_str().is_empty() {
            Path::new(".")
        } else {
            base
        };
        RunConfigFile::parse(&text)?.resolve(base, |k| std::env::var(k).ok())
    }

    /// Overrides the seed everywhere it is used.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.learners.sgd.seed = seed;
        self
    }
}

/// A config pointing at the standard file names of a generated fixture.
pub fn fixture_config_file() -> RunConfigFile {
    RunConfigFile {
        data: DataConfig {
            stations: "stations.csv".into(),
            pollution: "pollution.csv".into(),
            weather: "weather.csv".into(),
            satellite_csv: Some("satellite.csv".into()),
            satellite_rasters: Some("satellite".into()),
            dem: "dem.asc".into(),
            landcover: "landcover.asc".into(),
            classmap: "classmap.csv".into(),
        },
        pollutants: default_pollutants(),
        models: default_models(),
        windows: default_windows(),
        learners: LearnerConfig::default(),
        output_dir: default_output_dir(),
        model_dir: None,
        seed: 0,
        workers: 0,
        predict_date: None,
        grid: None,
    }
}
