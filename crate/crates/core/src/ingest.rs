//! Readers and writers for the on-disk dataset, assembly of station-aligned
//! daily series, and the per-pollutant missingness report.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;

use crate::data::{CivilDate, DailySeries, Measurement, Pollutant, Station};
use crate::error::{Error, Result};
use crate::raster::{
    csv_error, load_classmap, load_grid, radius_mean, topo_profile, LandCoverMap, RasterGrid,
    TopoProfile, NEIGHBOURHOOD_RADIUS,
};

/// Satellite bands in feature order.
pub const SATELLITE_BANDS: [&str; 6] = ["no2", "o3", "so2", "hcho", "co", "aerosol_index"];

/// Raw weather variables in file order.
pub const WEATHER_VARS: [&str; 9] = [
    "temp",
    "dewpoint",
    "humidity",
    "precip",
    "wind_speed",
    "wind_dir_deg",
    "pressure",
    "cloud_cover",
    "solar_rad",
];

pub const WIND_DIR_INDEX: usize = 5;

/// One optional series per pollutant, indexed by [`Pollutant::index`].
/// `None` for pollutants the station does not measure.
pub type PollutantSeries = [Option<DailySeries<f64>>; 5];
pub type BandSeries = [DailySeries<f64>; 6];

#[derive(Debug, Clone, PartialEq)]
pub struct WeatherSeries {
    pub vars: [DailySeries<f64>; 9],
}

impl WeatherSeries {
    pub fn start(&self) -> CivilDate {
        self.vars[0].start()
    }

    pub fn end(&self) -> CivilDate {
        self.vars[0].end()
    }

    /// All nine values for `date`, if present.
    pub fn day(&self, date: CivilDate) -> Option<[f64; 9]> {
        let mut out = [0.0; 9];
        for (o, s) in out.iter_mut().zip(&self.vars) {
            *o = s.value(date)?;
        }
        Some(out)
    }

    pub fn clip(&self, start: CivilDate, end: CivilDate) -> Self {
        WeatherSeries {
            vars: self.vars.each_ref().map(|s| s.clip(start, end)),
        }
    }
}

/// Everything the feature builder needs, clipped to one common date range.
#[derive(Debug, Clone, PartialEq)]
pub struct StationDataset {
    pub stations: Vec<Station>,
    pub pollution: Vec<PollutantSeries>,
    pub satellite: Vec<BandSeries>,
    pub weather: WeatherSeries,
    pub topo: Vec<TopoProfile<f64>>,
    pub start: CivilDate,
    pub end: CivilDate,
}

impl StationDataset {
    /// Aligns all sources to the intersection of their date ranges.
    pub fn assemble(
        stations: Vec<Station>,
        pollution: Vec<PollutantSeries>,
        satellite: Vec<BandSeries>,
        weather: WeatherSeries,
        topo: Vec<TopoProfile<f64>>,
    ) -> Result<Self> {
        let n = stations.len();
        for len in [pollution.len(), satellite.len(), topo.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        let mut start = weather.start();
        let mut end = weather.end();
        let poll_range = pollution
            .iter()
            .flat_map(|s| s.iter().flatten())
            .map(|s| (s.start(), s.end()))
            .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)));
        let sat_range = satellite
            .iter()
            .flat_map(|s| s.iter())
            .map(|s| (s.start(), s.end()))
            .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)));
        for (s, e) in poll_range.into_iter().chain(sat_range) {
            start = start.max(s);
            end = end.min(e);
        }
        if end < start {
            return Err(Error::Domain(format!(
                "source date ranges do not overlap (intersection {start}..{end})"
            )));
        }
        let pollution = pollution
            .iter()
            .map(|ps| {
                ps.each_ref()
                    .map(|s| s.as_ref().map(|s| s.clip(start, end)))
            })
            .collect();
        let satellite = satellite
            .iter()
            .map(|bs| bs.each_ref().map(|s| s.clip(start, end)))
            .collect();
        Ok(StationDataset {
            stations,
            pollution,
            satellite,
            weather: weather.clip(start, end),
            topo,
            start,
            end,
        })
    }

    pub fn n_days(&self) -> usize {
        (self.end.days_since(self.start) + 1) as usize
    }

    pub fn station_index(&self, id: &str) -> Option<usize> {
        self.stations.iter().position(|s| s.id == id)
    }

    pub fn years(&self) -> Vec<i32> {
        (self.start.year()..=self.end.year()).collect()
    }
}

// ---------------------------------------------------------------------------
// CSV plumbing

struct CsvTable {
    file: String,
    columns: HashMap<String, usize>,
    records: Vec<(u64, csv::StringRecord)>,
}

impl CsvTable {
    fn open(path: &Path, required: &[&str]) -> Result<Self> {
        let file = path.display().to_string();
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_error(&file, e))?;
        let headers = rdr.headers().map_err(|e| csv_error(&file, e))?.clone();
        let columns: HashMap<String, usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim_start_matches('\u{feff}').to_string(), i))
            .collect();
        for (i, name) in required.iter().enumerate() {
            if !columns.contains_key(*name) {
                return Err(Error::schema(
                    &file,
                    1,
                    i as u64 + 1,
                    format!("missing header column `{name}`"),
                ));
            }
        }
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_error(&file, e))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            records.push((line, rec));
        }
        Ok(CsvTable {
            file,
            columns,
            records,
        })
    }

    fn col(&self, name: &str) -> usize {
        self.columns[name]
    }

    fn field<'a>(&self, line: u64, rec: &'a csv::StringRecord, name: &str) -> Result<&'a str> {
        let c = self.col(name);
        rec.get(c).ok_or_else(|| {
            Error::schema(
                &self.file,
                line,
                c as u64 + 1,
                format!("missing field `{name}`"),
            )
        })
    }

    fn err(&self, line: u64, name: &str, msg: impl Into<String>) -> Error {
        Error::schema(&self.file, line, self.col(name) as u64 + 1, msg)
    }

    fn date(&self, line: u64, rec: &csv::StringRecord, name: &str) -> Result<CivilDate> {
        let s = self.field(line, rec, name)?;
        s.parse()
            .map_err(|_| self.err(line, name, format!("invalid ISO-8601 date `{s}`")))
    }

    fn opt_f64(&self, line: u64, rec: &csv::StringRecord, name: &str) -> Result<Option<f64>> {
        let s = self.field(line, rec, name)?;
        if s.is_empty() {
            return Ok(None);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| self.err(line, name, format!("`{s}` is not a number")))?;
        if !v.is_finite() {
            return Err(self.err(line, name, format!("`{s}` is not finite")));
        }
        Ok(Some(v))
    }

    fn f64(&self, line: u64, rec: &csv::StringRecord, name: &str) -> Result<f64> {
        self.opt_f64(line, rec, name)?
            .ok_or_else(|| self.err(line, name, format!("`{name}` must not be empty")))
    }
}

fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let name = path.display().to_string();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(&name, e))?;
    w.write_record(header).map_err(|e| csv_error(&name, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(&name, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// stations.csv

/// Reads `stations.csv`: `station_id,lon,lat,pollutants` with optional
/// projected `x,y` columns.
pub fn read_stations(path: impl AsRef<Path>) -> Result<Vec<Station>> {
    let t = CsvTable::open(path.as_ref(), &["station_id", "lon", "lat", "pollutants"])?;
    let has_xy = t.columns.contains_key("x") && t.columns.contains_key("y");
    let mut out: Vec<Station> = Vec::new();
    for (line, rec) in &t.records {
        let line = *line;
        let id = t.field(line, rec, "station_id")?.to_string();
        if id.is_empty() {
            return Err(t.err(line, "station_id", "empty station id"));
        }
        if out.iter().any(|s| s.id == id) {
            return Err(t.err(line, "station_id", format!("duplicate station id `{id}`")));
        }
        let lon = t.f64(line, rec, "lon")?;
        let lat = t.f64(line, rec, "lat")?;
        let mut measured = Vec::new();
        for tok in t
            .field(line, rec, "pollutants")?
            .split(';')
            .filter(|s| !s.trim().is_empty())
        {
            let p: Pollutant = tok.parse()?;
            if !measured.contains(&p) {
                measured.push(p);
            }
        }
        if measured.is_empty() {
            return Err(t.err(line, "pollutants", "station measures no pollutant"));
        }
        measured.sort();
        let xy = if has_xy {
            match (t.opt_f64(line, rec, "x")?, t.opt_f64(line, rec, "y")?) {
                (Some(x), Some(y)) => Some((x, y)),
                _ => None,
            }
        } else {
            None
        };
        out.push(Station {
            id,
            lon,
            lat,
            measured,
            xy,
        });
    }
    Ok(out)
}

pub fn write_stations(stations: &[Station], path: impl AsRef<Path>) -> Result<()> {
    let has_xy = stations.iter().any(|s| s.xy.is_some());
    let mut header = vec!["station_id", "lon", "lat", "pollutants"];
    if has_xy {
        header.extend(["x", "y"]);
    }
    let rows = stations.iter().map(|s| {
        let mut row = vec![
            s.id.clone(),
            s.lon.to_string(),
            s.lat.to_string(),
            s.measured
                .iter()
                .map(|p| p.as_str())
                .collect::<Vec<_>>()
                .join(";"),
        ];
        if has_xy {
            row.push(fmt_opt(s.xy.map(|p| p.0)));
            row.push(fmt_opt(s.xy.map(|p| p.1)));
        }
        row
    });
    write_csv(path.as_ref(), &header, rows)
}

// ---------------------------------------------------------------------------
// pollution.csv

#[derive(Debug, Clone, PartialEq)]
pub struct PollutionRecord {
    pub line: u64,
    pub station_id: String,
    pub date: CivilDate,
    pub pollutant: Pollutant,
    pub value: Option<f64>,
}

/// Parses `pollution.csv` rows without resolving station ids.
pub fn read_pollution_records(path: impl AsRef<Path>) -> Result<Vec<PollutionRecord>> {
    let t = CsvTable::open(path.as_ref(), &["station_id", "date", "pollutant", "value"])?;
    t.records
        .iter()
        .map(|(line, rec)| {
            let line = *line;
            Ok(PollutionRecord {
                line,
                station_id: t.field(line, rec, "station_id")?.to_string(),
                date: t.date(line, rec, "date")?,
                pollutant: t.field(line, rec, "pollutant")?.parse()?,
                value: t.opt_f64(line, rec, "value")?,
            })
        })
        .collect()
}

/// Per-station pollutant series over the span of the file.
///
/// Absent rows and empty values are missing. Duplicate rows: the last wins.
pub fn read_pollution(
    path: impl AsRef<Path>,
    stations: &[Station],
) -> Result<Vec<PollutantSeries>> {
    let path = path.as_ref();
    let records = read_pollution_records(path)?;
    pollution_from_records(&path.display().to_string(), &records, stations)
}

pub fn pollution_from_records(
    file: &str,
    records: &[PollutionRecord],
    stations: &[Station],
) -> Result<Vec<PollutantSeries>> {
    let index: HashMap<&str, usize> = stations
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();
    for r in records {
        if !index.contains_key(r.station_id.as_str()) {
            return Err(Error::UnknownStation(r.station_id.clone()));
        }
        if let Some(v) = r.value {
            if v < 0.0 {
                return Err(Error::schema(
                    file,
                    r.line,
                    4,
                    format!("negative concentration {v}"),
                ));
            }
        }
    }
    let Some((start, end)) = records
        .iter()
        .map(|r| (r.date, r.date))
        .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)))
    else {
        return Ok(stations.iter().map(|_| Default::default()).collect());
    };
    let mut out: Vec<PollutantSeries> = stations
        .iter()
        .map(|s| {
            std::array::from_fn(|k| {
                s.measures(Pollutant::ALL[k])
                    .then(|| DailySeries::missing(start, end))
            })
        })
        .collect();
    let mut seen = HashSet::new();
    for r in records {
        let si = index[r.station_id.as_str()];
        let Some(series) = out[si][r.pollutant.index()].as_mut() else {
            warn!(
                "{file}:{}: station {} is not declared to measure {}; row ignored",
                r.line, r.station_id, r.pollutant
            );
            continue;
        };
        if !seen.insert((si, r.pollutant, r.date)) {
            warn!(
                "{file}:{}: duplicate row for ({}, {}, {}); keeping the last one",
                r.line, r.station_id, r.date, r.pollutant
            );
        }
        series.set(r.date, r.value.map(Measurement::observed));
    }
    Ok(out)
}

/// Writes every day of every measured series; missing readings get an empty value.
pub fn write_pollution(
    stations: &[Station],
    pollution: &[PollutantSeries],
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut rows = Vec::new();
    for (st, ps) in stations.iter().zip(pollution) {
        for p in Pollutant::ALL {
            let Some(s) = &ps[p.index()] else { continue };
            for (i, m) in s.measurements().iter().enumerate() {
                rows.push(vec![
                    st.id.clone(),
                    s.date_at(i).to_string(),
                    p.to_string(),
                    fmt_opt(m.map(|m| m.value)),
                ]);
            }
        }
    }
    write_csv(
        path.as_ref(),
        &["station_id", "date", "pollutant", "value"],
        rows,
    )
}

// ---------------------------------------------------------------------------
// satellite.csv and daily rasters

#[derive(Debug, Clone, PartialEq)]
pub struct SatelliteRecord {
    pub line: u64,
    pub station_id: String,
    pub date: CivilDate,
    pub bands: [Option<f64>; 6],
}

pub fn read_satellite_records(path: impl AsRef<Path>) -> Result<Vec<SatelliteRecord>> {
    let mut required = vec!["station_id", "date"];
    required.extend(SATELLITE_BANDS);
    let t = CsvTable::open(path.as_ref(), &required)?;
    t.records
        .iter()
        .map(|(line, rec)| {
            let line = *line;
            let mut bands = [None; 6];
            for (b, name) in bands.iter_mut().zip(SATELLITE_BANDS) {
                *b = t.opt_f64(line, rec, name)?;
            }
            Ok(SatelliteRecord {
                line,
                station_id: t.field(line, rec, "station_id")?.to_string(),
                date: t.date(line, rec, "date")?,
                bands,
            })
        })
        .collect()
}

/// Per-station band series from pre-extracted `satellite.csv`.
pub fn read_satellite_csv(path: impl AsRef<Path>, stations: &[Station]) -> Result<Vec<BandSeries>> {
    let records = read_satellite_records(path)?;
    satellite_from_records(&records, stations)
}

pub fn satellite_from_records(
    records: &[SatelliteRecord],
    stations: &[Station],
) -> Result<Vec<BandSeries>> {
    let index: HashMap<&str, usize> = stations
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();
    let (start, end) = records
        .iter()
        .map(|r| (r.date, r.date))
        .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)))
        .ok_or(Error::EmptyInput)?;
    let mut out: Vec<BandSeries> = stations
        .iter()
        .map(|_| std::array::from_fn(|_| DailySeries::missing(start, end)))
        .collect();
    for r in records {
        let si = *index
            .get(r.station_id.as_str())
            .ok_or_else(|| Error::UnknownStation(r.station_id.clone()))?;
        for (s, v) in out[si].iter_mut().zip(r.bands) {
            s.set(r.date, v.map(Measurement::observed));
        }
    }
    Ok(out)
}

pub fn write_satellite_csv(
    stations: &[Station],
    satellite: &[BandSeries],
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut header = vec!["station_id", "date"];
    header.extend(SATELLITE_BANDS);
    let mut rows = Vec::new();
    for (st, bands) in stations.iter().zip(satellite) {
        let s0 = &bands[0];
        for d in s0.start().iter_to(s0.end()) {
            let mut row = vec![st.id.clone(), d.to_string()];
            row.extend(bands.iter().map(|s| fmt_opt(s.value(d))));
            rows.push(row);
        }
    }
    write_csv(path.as_ref(), &header, rows)
}

/// Daily satellite rasters: up to six band grids per date, `None` for absent bands.
pub type DailyRasters = BTreeMap<CivilDate, [Option<RasterGrid<f64>>; 6]>;

/// Loads `<dir>/<YYYY-MM-DD>/<band>.asc`; absent band files are left as `None`.
pub fn load_satellite_rasters(dir: impl AsRef<Path>) -> Result<DailyRasters> {
    let dir = dir.as_ref();
    let mut out = DailyRasters::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut day_dirs: Vec<(CivilDate, PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if !path.is_dir() {
            continue;
        }
        let Some(date) = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.parse().ok())
        else {
            continue;
        };
        day_dirs.push((date, path));
    }
    day_dirs.sort();
    for (date, path) in day_dirs {
        let mut bands: [Option<RasterGrid<f64>>; 6] = Default::default();
        for (slot, name) in bands.iter_mut().zip(SATELLITE_BANDS) {
            let f = path.join(format!("{name}.asc"));
            if f.exists() {
                *slot = Some(load_grid(&f)?);
            }
        }
        out.insert(date, bands);
    }
    Ok(out)
}

/// Per-station 500 m band means for the dates covered by `rasters`.
pub fn extract_satellite(rasters: &DailyRasters, stations: &[Station]) -> Result<Vec<BandSeries>> {
    let (Some(start), Some(end)) = (
        rasters.keys().next().copied(),
        rasters.keys().next_back().copied(),
    ) else {
        return Err(Error::EmptyInput);
    };
    let mut out = Vec::with_capacity(stations.len());
    for st in stations {
        let (x, y) = st.projected()?;
        let mut bands: BandSeries = std::array::from_fn(|_| DailySeries::missing(start, end));
        for (date, grids) in rasters {
            for (series, grid) in bands.iter_mut().zip(grids) {
                if let Some(g) = grid {
                    series.set(
                        *date,
                        radius_mean(g, x, y, NEIGHBOURHOOD_RADIUS).map(Measurement::observed),
                    );
                }
            }
        }
        out.push(bands);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// weather.csv

#[derive(Debug, Clone, PartialEq)]
pub struct WeatherRecord {
    pub line: u64,
    pub date: CivilDate,
    pub values: [f64; 9],
}

pub fn read_weather_records(path: impl AsRef<Path>) -> Result<Vec<WeatherRecord>> {
    let mut required = vec!["date"];
    required.extend(WEATHER_VARS);
    let t = CsvTable::open(path.as_ref(), &required)?;
    t.records
        .iter()
        .map(|(line, rec)| {
            let line = *line;
            let mut values = [0.0; 9];
            for (v, name) in values.iter_mut().zip(WEATHER_VARS) {
                *v = t.f64(line, rec, name)?;
            }
            let dir = values[WIND_DIR_INDEX];
            if !(0.0..=360.0).contains(&dir) {
                return Err(t.err(
                    line,
                    "wind_dir_deg",
                    format!("direction outside [0,360]: {dir}"),
                ));
            }
            Ok(WeatherRecord {
                line,
                date: t.date(line, rec, "date")?,
                values,
            })
        })
        .collect()
}

/// City-level weather; every date between the first and last row must be present.
pub fn read_weather(path: impl AsRef<Path>) -> Result<WeatherSeries> {
    weather_from_records(&read_weather_records(path)?)
}

pub fn weather_from_records(records: &[WeatherRecord]) -> Result<WeatherSeries> {
    let (start, end) = records
        .iter()
        .map(|r| (r.date, r.date))
        .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)))
        .ok_or(Error::EmptyInput)?;
    let mut vars: [DailySeries<f64>; 9] = std::array::from_fn(|_| DailySeries::missing(start, end));
    for r in records {
        for (s, v) in vars.iter_mut().zip(r.values) {
            s.set(r.date, Some(Measurement::observed(v)));
        }
    }
    if let Some(i) = vars[0].measurements().iter().position(|m| m.is_none()) {
        return Err(Error::Gap(vars[0].date_at(i)));
    }
    Ok(WeatherSeries { vars })
}

pub fn write_weather(weather: &WeatherSeries, path: impl AsRef<Path>) -> Result<()> {
    let mut header = vec!["date"];
    header.extend(WEATHER_VARS);
    let rows = weather.start().iter_to(weather.end()).map(|d| {
        let mut row = vec![d.to_string()];
        row.extend(weather.vars.iter().map(|s| fmt_opt(s.value(d))));
        row
    });
    write_csv(path.as_ref(), &header, rows)
}

// ---------------------------------------------------------------------------
// Whole-dataset loading

/// Where the satellite features come from.
#[derive(Debug, Clone, PartialEq)]
pub enum SatelliteSource {
    Csv(PathBuf),
    Rasters(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPaths {
    pub stations: PathBuf,
    pub pollution: PathBuf,
    pub weather: PathBuf,
    pub satellite: SatelliteSource,
    pub dem: PathBuf,
    pub landcover: PathBuf,
    pub classmap: PathBuf,
}

/// Static layers needed for terrain features.
#[derive(Debug, Clone)]
pub struct TerrainLayers {
    pub dem: RasterGrid<f64>,
    pub landcover: RasterGrid<f64>,
    pub classmap: LandCoverMap,
}

impl TerrainLayers {
    pub fn load(paths: &DatasetPaths) -> Result<Self> {
        Ok(TerrainLayers {
            dem: load_grid(&paths.dem)?,
            landcover: load_grid(&paths.landcover)?,
            classmap: load_classmap(&paths.classmap)?,
        })
    }

    pub fn profile(&self, x: f64, y: f64) -> Result<TopoProfile<f64>> {
        topo_profile(&self.dem, &self.landcover, &self.classmap, x, y)
    }
}

pub fn load_dataset(paths: &DatasetPaths) -> Result<StationDataset> {
    let stations = read_stations(&paths.stations)?;
    let pollution = read_pollution(&paths.pollution, &stations)?;
    let weather = read_weather(&paths.weather)?;
    let satellite = match &paths.satellite {
        SatelliteSource::Csv(p) => read_satellite_csv(p, &stations)?,
        SatelliteSource::Rasters(dir) => {
            extract_satellite(&load_satellite_rasters(dir)?, &stations)?
        }
    };
    let terrain = TerrainLayers::load(paths)?;
    let topo = stations
        .iter()
        .map(|s| {
            let (x, y) = s.projected()?;
            terrain.profile(x, y)
        })
        .collect::<Result<Vec<_>>>()?;
    StationDataset::assemble(stations, pollution, satellite, weather, topo)
}

// ---------------------------------------------------------------------------
// Missingness

/// Share of expected stations missing a reading, per pollutant and day.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingnessReport {
    pub start: CivilDate,
    /// `fractions[p][i]` for day `start + i`; `None` when no station measures `p`.
    pub fractions: [Vec<Option<f64>>; 5],
}

impl MissingnessReport {
    pub fn fraction(&self, p: Pollutant, date: CivilDate) -> Option<f64> {
        let i = date.days_since(self.start);
        if i < 0 {
            return None;
        }
        self.fractions[p.index()].get(i as usize).copied().flatten()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut header = vec!["date"];
        header.extend(Pollutant::ALL.map(|p| p.as_str()));
        let n = self.fractions[0].len();
        let rows = (0..n).map(|i| {
            let mut row = vec![self.start.add_days(i as i64).to_string()];
            row.extend(self.fractions.iter().map(|f| fmt_opt(f[i])));
            row
        });
        write_csv(path.as_ref(), &header, rows)
    }
}

/// Missing fraction per (pollutant, day); the denominator is the number of
/// stations that measure the pollutant.
pub fn missingness_report(ds: &StationDataset) -> MissingnessReport {
    let n = ds.n_days();
    let fractions = Pollutant::ALL.map(|p| {
        let measuring: Vec<&DailySeries<f64>> = ds
            .pollution
            .iter()
            .filter_map(|ps| ps[p.index()].as_ref())
            .collect();
        (0..n)
            .map(|i| {
                if measuring.is_empty() {
                    return None;
                }
                let date = ds.start.add_days(i as i64);
                let missing = measuring.iter().filter(|s| s.value(date).is_none()).count();
                Some(missing as f64 / measuring.len() as f64)
            })
            .collect()
    });
    MissingnessReport {
        start: ds.start,
        fractions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn d(s: &str) -> CivilDate {
        s.parse().unwrap()
    }

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::File::create(&p)
            .unwrap()
            .write_all(text.as_bytes())
            .unwrap();
        p
    }

    fn stations() -> Vec<Station> {
        vec![
            Station {
                id: "ST1".into(),
                lon: 9.19,
                lat: 45.46,
                measured: vec![Pollutant::Pm10, Pollutant::No2],
                xy: Some((500.0, 500.0)),
            },
            Station {
                id: "ST2".into(),
                lon: 9.2,
                lat: 45.5,
                measured: vec![Pollutant::Pm10],
                xy: Some((1500.0, 1500.0)),
            },
        ]
    }

    #[test]
    fn pollution_rows_and_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "pollution.csv",
            "station_id,date,pollutant,value\nST1,2019-03-02,PM10,41.0\nST1,2019-03-04,PM10,40\nST2,2019-03-03,PM10,\n",
        );
        let s = read_pollution(&p, &stations()).unwrap();
        let pm = s[0][Pollutant::Pm10.index()].as_ref().unwrap();
        assert_eq!(pm.value(d("2019-03-02")), Some(41.0));
        assert_eq!(pm.value(d("2019-03-03")), None);
        assert!(s[1][Pollutant::No2.index()].is_none());
    }

    #[test]
    fn unknown_pollutant_and_station() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "a.csv",
            "station_id,date,pollutant,value\nST1,2019-03-02,CO2,1\n",
        );
        assert!(
            matches!(read_pollution(&p, &stations()), Err(Error::UnknownPollutant(s)) if s == "CO2")
        );
        let p = write(
            dir.path(),
            "b.csv",
            "station_id,date,pollutant,value\nZZ,2019-03-02,PM10,1\n",
        );
        assert!(
            matches!(read_pollution(&p, &stations()), Err(Error::UnknownStation(s)) if s == "ZZ")
        );
    }

    #[test]
    fn pollution_schema_error_position() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "a.csv",
            "station_id,date,pollutant,value\nST1,2019-03-02,PM10,abc\n",
        );
        match read_pollution(&p, &stations()) {
            Err(Error::Schema { line, column, .. }) => assert_eq!((line, column), (2, 4)),
            other => panic!("unexpected {other:?}"),
        }
        let p = write(dir.path(), "b.csv", "station_id,date,value\n");
        assert!(matches!(
            read_pollution(&p, &stations()),
            Err(Error::Schema { line: 1, .. })
        ));
    }

    #[test]
    fn duplicate_rows_last_wins() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "a.csv",
            "station_id,date,pollutant,value\nST1,2019-03-02,PM10,1\nST1,2019-03-02,PM10,2\n",
        );
        let s = read_pollution(&p, &stations()).unwrap();
        assert_eq!(s[0][0].as_ref().unwrap().value(d("2019-03-02")), Some(2.0));
    }

    const WEATHER_HEADER: &str = "date,temp,dewpoint,humidity,precip,wind_speed,wind_dir_deg,pressure,cloud_cover,solar_rad\n";

    #[test]
    fn weather_complete_and_gap() {
        let dir = tempfile::tempdir().unwrap();
        let row = |date: &str| format!("{date},10,5,70,0,3,180,1013,50,200\n");
        let text = format!(
            "{WEATHER_HEADER}{}{}{}",
            row("2020-02-28"),
            row("2020-02-29"),
            row("2020-03-01")
        );
        let w = read_weather(write(dir.path(), "w.csv", &text)).unwrap();
        assert_eq!(w.vars.len(), 9);
        assert_eq!(w.vars[0].len(), 3);

        let text = format!("{WEATHER_HEADER}{}{}", row("2020-02-28"), row("2020-03-01"));
        match read_weather(write(dir.path(), "w2.csv", &text)) {
            Err(Error::Gap(date)) => assert_eq!(date, d("2020-02-29")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn weather_direction_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!("{WEATHER_HEADER}2020-01-01,10,5,70,0,3,400,1013,50,200\n");
        match read_weather(write(dir.path(), "w.csv", &text)) {
            Err(Error::Schema {
                message, column, ..
            }) => {
                assert!(message.contains("direction outside [0,360]"));
                assert_eq!(column, 7);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn satellite_from_uniform_raster() {
        let g = RasterGrid::new(20, 20, 0.0, 0.0, 100.0, -9999.0, vec![7.0; 400]).unwrap();
        let mut rasters = DailyRasters::new();
        let mut day1: [Option<RasterGrid<f64>>; 6] = Default::default();
        day1[0] = Some(g.clone());
        rasters.insert(d("2020-01-01"), day1);
        let mut day3: [Option<RasterGrid<f64>>; 6] = Default::default();
        day3[0] = Some(g);
        rasters.insert(d("2020-01-03"), day3);
        let s = extract_satellite(&rasters, &stations()).unwrap();
        for bands in &s {
            assert_eq!(bands[0].value(d("2020-01-01")), Some(7.0));
            assert_eq!(bands[0].value(d("2020-01-02")), None);
            assert_eq!(bands[1].value(d("2020-01-01")), None);
        }
    }

    fn tiny_dataset(values: &[[Option<f64>; 2]]) -> StationDataset {
        let st = vec![
            Station {
                id: "A".into(),
                lon: 0.0,
                lat: 0.0,
                measured: vec![Pollutant::Pm10],
                xy: None,
            },
            Station {
                id: "B".into(),
                lon: 0.0,
                lat: 0.0,
                measured: vec![Pollutant::Pm10],
                xy: None,
            },
        ];
        let start = d("2020-01-01");
        let pollution = (0..2)
            .map(|k| {
                let v: Vec<Option<f64>> = values.iter().map(|r| r[k]).collect();
                let mut ps: PollutantSeries = Default::default();
                ps[0] = Some(DailySeries::from_options(start, &v).unwrap());
                ps
            })
            .collect();
        let n = values.len();
        let sat: Vec<BandSeries> = (0..2)
            .map(|_| {
                std::array::from_fn(|_| DailySeries::from_observed(start, &vec![1.0; n]).unwrap())
            })
            .collect();
        let weather = WeatherSeries {
            vars: std::array::from_fn(|_| {
                DailySeries::from_observed(start, &vec![1.0; n]).unwrap()
            }),
        };
        let topo = vec![
            TopoProfile {
                alt_point: Some(1.0),
                alt_100m: Some(1.0),
                alt_1km: Some(1.0),
                landcover_fractions: [0.1; 10],
            };
            2
        ];
        StationDataset::assemble(st, pollution, sat, weather, topo).unwrap()
    }

    #[test]
    fn missingness_fractions() {
        let ds = tiny_dataset(&[[Some(1.0), None], [Some(1.0), Some(2.0)], [None, None]]);
        let r = missingness_report(&ds);
        assert_eq!(r.fraction(Pollutant::Pm10, d("2020-01-01")), Some(0.5));
        assert_eq!(r.fraction(Pollutant::Pm10, d("2020-01-02")), Some(0.0));
        assert_eq!(r.fraction(Pollutant::Pm10, d("2020-01-03")), Some(1.0));
        assert_eq!(r.fraction(Pollutant::O3, d("2020-01-01")), None);
    }

    #[test]
    fn assemble_uses_range_intersection() {
        let start = d("2020-01-01");
        let st = stations();
        let mut ps: PollutantSeries = Default::default();
        ps[0] = Some(DailySeries::from_observed(start, &[1.0; 10]).unwrap());
        let pollution = vec![ps.clone(), ps];
        let sat: Vec<BandSeries> = (0..2)
            .map(|_| {
                std::array::from_fn(|_| {
                    DailySeries::from_observed(start.add_days(2), &[1.0; 10]).unwrap()
                })
            })
            .collect();
        let weather = WeatherSeries {
            vars: std::array::from_fn(|_| {
                DailySeries::from_observed(start.add_days(-3), &[1.0; 12]).unwrap()
            }),
        };
        let topo = vec![
            TopoProfile {
                alt_point: None,
                alt_100m: None,
                alt_1km: Some(1.0),
                landcover_fractions: [0.0; 10],
            };
            2
        ];
        let ds = StationDataset::assemble(st, pollution, sat, weather, topo).unwrap();
        assert_eq!(ds.start, d("2020-01-03"));
        assert_eq!(ds.end, d("2020-01-09"));
        assert_eq!(ds.weather.start(), ds.start);
        assert_eq!(ds.satellite[1][5].len(), 7);
    }
}
