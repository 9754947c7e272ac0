//! Deterministic synthetic datasets for tests and examples.
//!
//! A fixture is a small city: a 10 km x 10 km projected extent holding a
//! handful of stations, analytic daily satellite fields, a smooth DEM and a
//! blocky land-cover map. Pollutant readings follow a planted function of the
//! same inputs the feature pipeline sees, so learners can be checked against a
//! known answer.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{CivilDate, DailySeries, Measurement, Pollutant, Station};
use crate::error::{Error, Result};
use crate::ingest::{
    write_pollution, write_satellite_csv, write_stations, write_weather, BandSeries, DatasetPaths,
    PollutantSeries, SatelliteSource, WeatherSeries, SATELLITE_BANDS,
};
use crate::raster::{
    radius_mean, write_classmap, write_grid, LandCover, LandCoverMap, RasterGrid,
    NEIGHBOURHOOD_RADIUS,
};

pub const GRID_XLL: f64 = 500_000.0;
pub const GRID_YLL: f64 = 5_000_000.0;
pub const GRID_CELL: f64 = 250.0;
pub const GRID_CELLS: usize = 40;
const NODATA: f64 = -9999.0;

/// How pollutant readings depend on the inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantedTarget {
    /// Affine in the previous day's satellite band, today's temperature and
    /// yesterday's humidity.
    Linear,
    /// A step that fires only when yesterday's satellite band and today's
    /// humidity are both high.
    Threshold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub n_stations: usize,
    pub n_days: usize,
    pub start: CivilDate,
    pub seed: u64,
    pub target: PlantedTarget,
    /// Half-width of the uniform noise added to every reading.
    pub noise: f64,
    /// Probability that a single pollutant reading is left blank.
    pub pollution_missing: f64,
    /// Probability that a whole day of satellite rasters is absent.
    pub satellite_missing: f64,
    /// Number of trailing days whose rasters are written to disk.
    pub raster_days: usize,
    /// Weather days beyond the last reading, for next-day prediction.
    pub extra_weather_days: usize,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            n_stations: 3,
            n_days: 120,
            start: CivilDate::new(2019, 10, 15).expect("valid date"),
            seed: 7,
            target: PlantedTarget::Threshold,
            noise: 0.5,
            pollution_missing: 0.05,
            satellite_missing: 0.05,
            raster_days: 20,
            extra_weather_days: 1,
        }
    }
}

impl FixtureSpec {
    pub fn end(&self) -> CivilDate {
        self.start.add_days(self.n_days as i64 - 1)
    }

    fn validate(&self) -> Result<()> {
        if self.n_stations == 0 || self.n_days < 2 {
            return Err(Error::Config(
                "fixture needs at least one station and two days".into(),
            ));
        }
        for (name, p) in [
            ("pollution_missing", self.pollution_missing),
            ("satellite_missing", self.satellite_missing),
        ] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0,1), got {p}")));
            }
        }
        if !(self.noise >= 0.0) {
            return Err(Error::Config(format!(
                "noise must be >= 0, got {}",
                self.noise
            )));
        }
        Ok(())
    }
}

/// What [`generate_fixture`] wrote.
#[derive(Debug, Clone)]
pub struct FixtureOutput {
    pub dir: PathBuf,
    pub paths: DatasetPaths,
    pub raster_dir: PathBuf,
    pub stations: Vec<Station>,
    /// First and last day with pollutant readings.
    pub start: CivilDate,
    pub end: CivilDate,
    /// Last day with weather.
    pub weather_end: CivilDate,
}

/// Measured pollutants cycle through three station profiles.
fn measured_set(i: usize) -> Vec<Pollutant> {
    use Pollutant::*;
    match i % 3 {
        0 => vec![Pm10, Pm25, No2, So2, O3],
        1 => vec![Pm10, Pm25, No2],
        _ => vec![Pm10, O3, So2],
    }
}

/// Stations sit on a 2.5 km lattice well inside the extent.
pub fn fixture_stations(n: usize) -> Vec<Station> {
    (0..n)
        .map(|i| {
            let shift = 250.0 * ((i / 9) % 4) as f64;
            let x = GRID_XLL + 2500.0 + 2500.0 * (i % 3) as f64 + shift;
            let y = GRID_YLL + 2500.0 + 2500.0 * ((i / 3) % 3) as f64 + shift;
            Station {
                id: format!("ST{:02}", i + 1),
                lon: 9.0 + (x - GRID_XLL) / 78_000.0,
                lat: 45.0 + (y - GRID_YLL) / 111_000.0,
                measured: measured_set(i),
                xy: Some((x, y)),
            }
        })
        .collect()
}

fn grid(f: impl FnMut(f64, f64) -> f64) -> Result<RasterGrid<f64>> {
    RasterGrid::from_fn(
        GRID_CELLS, GRID_CELLS, GRID_XLL, GRID_YLL, GRID_CELL, NODATA, f,
    )
}

#[derive(Debug, Clone, Copy)]
struct BandField {
    mean: f64,
    amp: f64,
    phase: f64,
    slope: f64,
}

impl BandField {
    fn value(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - GRID_XLL, y - GRID_YLL);
        self.mean + self.amp * (dx / 1300.0 + self.phase).sin() + self.slope * dy / 1000.0
    }
}

fn weather_day(rng: &mut ChaCha8Rng, day: CivilDate) -> [f64; 9] {
    let season = (std::f64::consts::TAU * (day.day_of_year() as f64 - 110.0) / 365.0).sin();
    let temp = 13.0 + 10.0 * season + rng.gen_range(-3.0..3.0);
    let dew = temp - rng.gen_range(1.0..8.0);
    let humidity = rng.gen_range(40.0..95.0);
    let precip = (rng.gen_range(-6.0f64..4.0)).max(0.0);
    let wind_speed = rng.gen_range(0.5..6.0);
    let wind_dir = rng.gen_range(0.0..360.0);
    let pressure = 1013.0 + rng.gen_range(-12.0..12.0);
    let cloud = rng.gen_range(0.0..100.0);
    let solar = (150.0 + 120.0 * season) * (1.0 - cloud / 200.0);
    [
        temp, dew, humidity, precip, wind_speed, wind_dir, pressure, cloud, solar,
    ]
}

/// Planted reading for pollutant `k` given yesterday's band value and the
/// weather of yesterday and today.
fn planted(
    target: PlantedTarget,
    k: usize,
    sat: f64,
    wx_prev: &[f64; 9],
    wx_today: &[f64; 9],
) -> f64 {
    let k = k as f64;
    match target {
        PlantedTarget::Linear => {
            20.0 + 3.0 * k + (4.0 + k) * sat + 0.5 * wx_today[0] + 0.1 * wx_prev[2]
        }
        PlantedTarget::Threshold => {
            let step = if sat > 5.5 && wx_today[2] > 65.0 {
                25.0
            } else {
                0.0
            };
            15.0 + 2.0 * k + step + 0.2 * wx_today[0]
        }
    }
}

/// Band used by the planted function of pollutant `k`.
pub fn planted_band(p: Pollutant) -> usize {
    p.index() % SATELLITE_BANDS.len()
}

/// Writes a complete dataset under `dir`.
///
/// Files: `stations.csv`, `pollution.csv`, `weather.csv`, `satellite.csv`,
/// `dem.asc`, `landcover.asc`, `classmap.csv` and
/// `satellite/<YYYY-MM-DD>/<band>.asc` for the trailing raster days.
pub fn generate_fixture(spec: &FixtureSpec, dir: impl AsRef<Path>) -> Result<FixtureOutput> {
    spec.validate()?;
    let dir = dir.as_ref().to_path_buf();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let start = spec.start;
    let end = spec.end();
    let weather_end = end.add_days(spec.extra_weather_days as i64);
    let stations = fixture_stations(spec.n_stations);

    let weather_days: Vec<[f64; 9]> = start
        .iter_to(weather_end)
        .map(|d| weather_day(&mut rng, d))
        .collect();
    let slopes: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-0.1..0.1));
    let phases: [f64; 6] = std::array::from_fn(|_| rng.gen_range(0.0..std::f64::consts::TAU));
    let fields: Vec<[BandField; 6]> = (0..spec.n_days)
        .map(|_| {
            std::array::from_fn(|b| BandField {
                mean: rng.gen_range(3.0..8.0),
                amp: rng.gen_range(0.5..1.5),
                phase: phases[b],
                slope: slopes[b],
            })
        })
        .collect();
    let sat_present: Vec<bool> = (0..spec.n_days)
        .map(|_| rng.gen::<f64>() >= spec.satellite_missing)
        .collect();

    let dem = grid(|x, y| 120.0 + 0.004 * (x - GRID_XLL) + 15.0 * ((y - GRID_YLL) / 1700.0).sin())?;
    let block_codes: Vec<f64> = (0..(GRID_CELLS / 2) * (GRID_CELLS / 2))
        .map(|_| rng.gen_range(1..=12) as f64)
        .collect();
    let mut cells = Vec::with_capacity(GRID_CELLS * GRID_CELLS);
    for row in 0..GRID_CELLS {
        for col in 0..GRID_CELLS {
            cells.push(block_codes[(row / 2) * (GRID_CELLS / 2) + col / 2]);
        }
    }
    let landcover = RasterGrid::new(
        GRID_CELLS, GRID_CELLS, GRID_XLL, GRID_YLL, GRID_CELL, NODATA, cells,
    )?;
    let classmap = LandCoverMap::new(
        LandCover::ALL
            .iter()
            .enumerate()
            .map(|(i, &c)| (i as i64 + 1, c))
            .chain([(11, LandCover::Urban), (12, LandCover::Green)]),
    );

    // Satellite: analytic rasters, station values by 500 m averaging.
    let raster_dir = dir.join("satellite");
    if raster_dir.exists() {
        fs::remove_dir_all(&raster_dir).map_err(|e| Error::io(&raster_dir, e))?;
    }
    let first_raster_day = spec.n_days.saturating_sub(spec.raster_days);
    let mut satellite: Vec<BandSeries> = stations
        .iter()
        .map(|_| std::array::from_fn(|_| DailySeries::missing(start, end)))
        .collect();
    for (i, day) in start.iter_to(end).enumerate() {
        if !sat_present[i] {
            continue;
        }
        let day_dir = raster_dir.join(day.to_string());
        if i >= first_raster_day {
            fs::create_dir_all(&day_dir).map_err(|e| Error::io(&day_dir, e))?;
        }
        for (b, field) in fields[i].iter().enumerate() {
            let g = grid(|x, y| field.value(x, y))?;
            for (st, bands) in stations.iter().zip(satellite.iter_mut()) {
                let (x, y) = st.projected()?;
                bands[b].set(
                    day,
                    radius_mean(&g, x, y, NEIGHBOURHOOD_RADIUS).map(Measurement::observed),
                );
            }
            if i >= first_raster_day {
                write_grid(&g, day_dir.join(format!("{}.asc", SATELLITE_BANDS[b])))?;
            }
        }
    }

    // Pollution: planted function of the station's extracted satellite values.
    let mut pollution: Vec<PollutantSeries> = Vec::with_capacity(stations.len());
    for (st, bands) in stations.iter().zip(&satellite) {
        let mut ps: PollutantSeries = Default::default();
        for p in Pollutant::ALL {
            if !st.measures(p) {
                continue;
            }
            let band = &bands[planted_band(p)];
            let mut series = DailySeries::missing(start, end);
            for (i, day) in start.iter_to(end).enumerate() {
                let prev = i.saturating_sub(1);
                let sat = band.value(day.pred()).or(band.value(day)).unwrap_or(5.0);
                let noise = if spec.noise > 0.0 {
                    rng.gen_range(-spec.noise..=spec.noise)
                } else {
                    0.0
                };
                let blank = rng.gen::<f64>() < spec.pollution_missing;
                let value = planted(
                    spec.target,
                    p.index(),
                    sat,
                    &weather_days[prev],
                    &weather_days[i],
                ) + noise;
                if !blank {
                    series.set(day, Some(Measurement::observed(value.max(0.0))));
                }
            }
            ps[p.index()] = Some(series);
        }
        pollution.push(ps);
    }

    let weather = WeatherSeries {
        vars: std::array::from_fn(|v| {
            let values: Vec<f64> = weather_days.iter().map(|d| d[v]).collect();
            DailySeries::from_observed(start, &values).expect("non-empty")
        }),
    };

    let paths = DatasetPaths {
        stations: dir.join("stations.csv"),
        pollution: dir.join("pollution.csv"),
        weather: dir.join("weather.csv"),
        satellite: SatelliteSource::Csv(dir.join("satellite.csv")),
        dem: dir.join("dem.asc"),
        landcover: dir.join("landcover.asc"),
        classmap: dir.join("classmap.csv"),
    };
    write_stations(&stations, &paths.stations)?;
    write_pollution(&stations, &pollution, &paths.pollution)?;
    write_weather(&weather, &paths.weather)?;
    if let SatelliteSource::Csv(p) = &paths.satellite {
        write_satellite_csv(&stations, &satellite, p)?;
    }
    write_grid(&dem, &paths.dem)?;
    write_grid(&landcover, &paths.landcover)?;
    write_classmap(&classmap, &paths.classmap)?;

    Ok(FixtureOutput {
        dir,
        paths,
        raster_dir,
        stations,
        start,
        end,
        weather_end,
    })
}
