//! Subcommand implementations. Each takes a resolved [`RunConfig`] and writes
//! its outputs under `output_dir`.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;

use airq_core::cv::{loyo_cv, results_table, write_results_csv, CvReport, ResultsTable};
use airq_core::features::{
    assemble_features, build_windows_from, feature_names, interpolate_gaps, FeatureInputs,
    SampleSet, WindowConfig,
};
use airq_core::ingest::{
    extract_satellite, load_dataset, load_satellite_rasters, missingness_report,
    read_satellite_csv, read_stations, read_weather, BandSeries, SatelliteSource, TerrainLayers,
    WeatherSeries, SATELLITE_BANDS,
};
use airq_core::models::{load_model, save_model};
use airq_core::raster::{load_grid, radius_mean, NEIGHBOURHOOD_RADIUS};
use airq_core::validate::{validate_files, ValidationReport};
use airq_core::{CivilDate, DailySeries, Error, Model, ModelKind, Pollutant, Result, Station};

use crate::config::{GridSpec, RunConfig};

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_rows(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let mut text = String::from(header);
    text.push('\n');
    for r in rows {
        text.push_str(&r);
        text.push('\n');
    }
    write_text(path, &text)
}

pub fn model_file_name(p: Pollutant, kind: ModelKind, w: usize) -> String {
    format!("{p}_{kind}_w{w}.model.json")
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<ValidationReport> {
    validate_files(&cfg.paths)
}

/// Writes `missingness.csv`.
pub fn cmd_report(cfg: &RunConfig) -> Result<PathBuf> {
    let ds = load_dataset(&cfg.paths)?;
    ensure_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("missingness.csv");
    missingness_report(&ds).write_csv(&path)?;
    Ok(path)
}

/// Sample sets for every configured (pollutant, window), in config order.
fn sample_sets(cfg: &RunConfig) -> Result<Vec<SampleSet>> {
    let ds = load_dataset(&cfg.paths)?;
    let inputs = FeatureInputs::from_dataset(&ds)?;
    let mut sets = Vec::new();
    for &p in &cfg.pollutants {
        for &w in &cfg.windows {
            sets.push(build_windows_from(&ds, &inputs, p, WindowConfig::new(w)?)?);
        }
    }
    Ok(sets)
}

fn jobs<'a>(cfg: &RunConfig, sets: &'a [SampleSet]) -> Vec<(&'a SampleSet, ModelKind)> {
    sets.iter()
        .flat_map(|s| cfg.models.iter().map(move |&k| (s, k)))
        .collect()
}

/// Fits every (pollutant, kind, w) on all samples and saves the models.
pub fn cmd_train(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let sets = sample_sets(cfg)?;
    ensure_dir(&cfg.model_dir)?;
    let jobs = jobs(cfg, &sets);
    let models = pool(cfg.workers)?.install(|| {
        jobs.par_iter()
            .map(|&(set, kind)| {
                let rows = set.rows();
                let y = set.targets();
                Model::fit(
                    kind,
                    set.pollutant,
                    set.window,
                    set.feature_names.clone(),
                    &rows,
                    &y,
                    &cfg.learners,
                )
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut written = Vec::with_capacity(models.len());
    for m in &models {
        let path = cfg
            .model_dir
            .join(model_file_name(m.pollutant, m.kind, m.window));
        save_model(m, &path)?;
        info!("wrote {}", path.display());
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub reports: Vec<CvReport>,
    pub table: ResultsTable,
}

/// Cross-validates every configured combination and writes `results.csv`,
/// `results_table.csv` and `results.txt`.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Evaluation> {
    let sets = sample_sets(cfg)?;
    let jobs = jobs(cfg, &sets);
    let reports = pool(cfg.workers)?.install(|| {
        jobs.par_iter()
            .map(|&(set, kind)| loyo_cv(set, kind, &cfg.learners))
            .collect::<Result<Vec<_>>>()
    })?;
    let table = results_table(&reports, &cfg.pollutants, &cfg.models, &cfg.windows)?;
    ensure_dir(&cfg.output_dir)?;
    write_results_csv(&reports, cfg.output_dir.join("results.csv"))?;
    table.write_csv(cfg.output_dir.join("results_table.csv"))?;
    write_text(&cfg.output_dir.join("results.txt"), &table.render_text())?;
    Ok(Evaluation { reports, table })
}

/// Unclipped inputs for prediction: weather may extend past the last reading.
pub struct PredictionInputs {
    pub stations: Vec<Station>,
    pub weather: WeatherSeries,
    pub terrain: TerrainLayers,
    pub features: FeatureInputs,
}

impl PredictionInputs {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let stations = read_stations(&cfg.paths.stations)?;
        let weather = read_weather(&cfg.paths.weather)?;
        let satellite: Vec<BandSeries> = match &cfg.paths.satellite {
            SatelliteSource::Csv(p) => read_satellite_csv(p, &stations)?,
            SatelliteSource::Rasters(dir) => {
                extract_satellite(&load_satellite_rasters(dir)?, &stations)?
            }
        };
        let terrain = TerrainLayers::load(&cfg.paths)?;
        let topo = stations
            .iter()
            .map(|s| {
                let (x, y) = s.projected()?;
                terrain.profile(x, y)
            })
            .collect::<Result<Vec<_>>>()?;
        let features = FeatureInputs::new(&stations, &satellite, weather.clone(), &topo)?;
        Ok(PredictionInputs {
            stations,
            weather,
            terrain,
            features,
        })
    }

    /// The configured date, else the last day with weather.
    pub fn target_date(&self, requested: Option<CivilDate>) -> CivilDate {
        requested.unwrap_or_else(|| self.weather.end())
    }
}

fn load_checked(cfg: &RunConfig, p: Pollutant, kind: ModelKind, w: usize) -> Result<Model> {
    let model: Model = load_model(cfg.model_dir.join(model_file_name(p, kind, w)))?;
    model.check_layout(&feature_names(w))?;
    if model.pollutant != p || model.kind != kind {
        return Err(Error::Domain(format!(
            "model file for {p}/{kind} holds a {}/{} model",
            model.pollutant, model.kind
        )));
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationPrediction {
    pub station_id: String,
    pub date: CivilDate,
    pub pollutant: Pollutant,
    pub kind: ModelKind,
    pub w: usize,
    /// `None` when an input day is outside the available data.
    pub value: Option<f64>,
}

pub fn predict_stations(cfg: &RunConfig) -> Result<Vec<StationPrediction>> {
    let inputs = PredictionInputs::load(cfg)?;
    let t = inputs.target_date(cfg.predict_date);
    let mut out = Vec::new();
    for &p in &cfg.pollutants {
        for &kind in &cfg.models {
            for &w in &cfg.windows {
                let model = load_checked(cfg, p, kind, w)?;
                for (si, st) in inputs.stations.iter().enumerate() {
                    let value = match inputs.features.station_features(si, t, w)? {
                        Some(x) => Some(model.predict_one(&x)?),
                        None => None,
                    };
                    out.push(StationPrediction {
                        station_id: st.id.clone(),
                        date: t,
                        pollutant: p,
                        kind,
                        w,
                        value,
                    });
                }
            }
        }
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes `predictions.csv`.
pub fn cmd_predict(cfg: &RunConfig) -> Result<PathBuf> {
    let preds = predict_stations(cfg)?;
    ensure_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("predictions.csv");
    write_rows(
        &path,
        "station_id,date,pollutant,model,w,prediction",
        preds.iter().map(|p| {
            format!(
                "{},{},{},{},{},{}",
                p.station_id,
                p.date,
                p.pollutant,
                p.kind,
                p.w,
                fmt_opt(p.value)
            )
        }),
    )?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellPrediction {
    pub cell_id: usize,
    pub x: f64,
    pub y: f64,
    pub value: Option<f64>,
}

/// Cell centers of `grid`, row-major starting from the south-west corner.
pub fn grid_cells(grid: &GridSpec) -> Vec<(usize, f64, f64)> {
    let count = |len: f64| ((len / grid.cell_size) - 1e-9).ceil().max(1.0) as usize;
    let nx = count(grid.xmax - grid.xmin);
    let ny = count(grid.ymax - grid.ymin);
    (0..ny)
        .flat_map(|j| (0..nx).map(move |i| (j, i)))
        .map(|(j, i)| {
            (
                j * nx + i,
                grid.xmin + (i as f64 + 0.5) * grid.cell_size,
                grid.ymin + (j as f64 + 0.5) * grid.cell_size,
            )
        })
        .collect()
}

type DayRasters = Vec<[Option<airq_core::Grid>; 6]>;

/// Band rasters for each day of `[t - w, t - 1]`, oldest first.
fn window_rasters(dir: &Path, t: CivilDate, w: usize) -> Result<DayRasters> {
    (1..=w)
        .rev()
        .map(|lag| {
            let day_dir = dir.join(t.add_days(-(lag as i64)).to_string());
            let mut bands: [Option<airq_core::Grid>; 6] = Default::default();
            for (slot, name) in bands.iter_mut().zip(SATELLITE_BANDS) {
                let f = day_dir.join(format!("{name}.asc"));
                if f.exists() {
                    *slot = Some(load_grid(&f)?);
                }
            }
            Ok(bands)
        })
        .collect()
}

fn cell_features(
    inputs: &PredictionInputs,
    rasters: &DayRasters,
    weather: &[[f64; 9]],
    forecast: &[f64; 9],
    t: CivilDate,
    x: f64,
    y: f64,
) -> Result<Option<Vec<f64>>> {
    let w = rasters.len();
    let start = t.add_days(-(w as i64));
    let mut sat = vec![[0.0; 6]; w];
    for b in 0..6 {
        let raw: Vec<Option<f64>> = rasters
            .iter()
            .map(|day| {
                day[b]
                    .as_ref()
                    .and_then(|g| radius_mean(g, x, y, NEIGHBOURHOOD_RADIUS))
            })
            .collect();
        let filled = match interpolate_gaps(&DailySeries::from_options(start, &raw)?) {
            Ok(s) => s,
            Err(Error::AllMissing) => return Ok(None),
            Err(e) => return Err(e),
        };
        for (k, day) in sat.iter_mut().enumerate() {
            day[b] = filled
                .value(start.add_days(k as i64))
                .expect("filled series");
        }
    }
    let Some(topo) = inputs.terrain.profile(x, y)?.feature_values() else {
        return Ok(None);
    };
    assemble_features(&sat, weather, &topo, t.pred(), forecast).map(Some)
}

pub fn predict_grid(cfg: &RunConfig) -> Result<Vec<CellPrediction>> {
    let grid = cfg
        .grid
        .as_ref()
        .ok_or_else(|| Error::Config("predict-grid needs a `grid` section".into()))?;
    let raster_dir = cfg
        .raster_dir
        .as_ref()
        .ok_or_else(|| Error::Config("predict-grid needs `data.satellite_rasters`".into()))?;
    let inputs = PredictionInputs::load(cfg)?;
    let t = inputs.target_date(grid.date.or(cfg.predict_date));
    let model = load_checked(cfg, grid.pollutant, grid.model, grid.w)?;
    let rasters = window_rasters(raster_dir, t, grid.w)?;
    let weather = (1..=grid.w)
        .rev()
        .map(|lag| {
            let d = t.add_days(-(lag as i64));
            inputs.weather.day(d).ok_or(Error::Gap(d))
        })
        .collect::<Result<Vec<_>>>()?;
    let forecast = inputs.weather.day(t).ok_or(Error::Gap(t))?;
    let cells = grid_cells(grid);
    pool(cfg.workers)?.install(|| {
        cells
            .par_iter()
            .map(|&(cell_id, x, y)| {
                let value = match cell_features(&inputs, &rasters, &weather, &forecast, t, x, y)? {
                    Some(f) => Some(model.predict_one(&f)?),
                    None => None,
                };
                Ok(CellPrediction {
                    cell_id,
                    x,
                    y,
                    value,
                })
            })
            .collect()
    })
}

/// Writes `grid_predictions.csv`.
pub fn cmd_predict_grid(cfg: &RunConfig) -> Result<PathBuf> {
    let cells = predict_grid(cfg)?;
    ensure_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("grid_predictions.csv");
    write_rows(
        &path,
        "cell_id,x,y,prediction",
        cells
            .iter()
            .map(|c| format!("{},{},{},{}", c.cell_id, c.x, c.y, fmt_opt(c.value))),
    )?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(w: f64, h: f64, cs: f64) -> GridSpec {
        GridSpec {
            pollutant: Pollutant::Pm10,
            model: ModelKind::Ols,
            w: 1,
            xmin: 0.0,
            ymin: 0.0,
            xmax: w,
            ymax: h,
            cell_size: cs,
            date: None,
        }
    }

    #[test]
    fn five_km_box_has_hundred_cells() {
        let cells = grid_cells(&spec(5000.0, 5000.0, 500.0));
        assert_eq!(cells.len(), 100);
        assert_eq!(cells[0], (0, 250.0, 250.0));
        assert_eq!(cells[10], (10, 250.0, 750.0));
        assert_eq!(cells[99], (99, 4750.0, 4750.0));
    }

    #[test]
    fn partial_cells_round_up() {
        assert_eq!(grid_cells(&spec(1200.0, 500.0, 500.0)).len(), 3);
    }
}
