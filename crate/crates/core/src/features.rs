//! Feature engineering: trigonometric encodings, gap filling, min-max
//! normalization and the sliding-window design matrix.
//!
//! A sample for station `s`, pollutant `p` and target day `t` with window `w`
//! is laid out as:
//!
//! 1. for each day `t-w, ..., t-1` (oldest first): 6 satellite bands,
//!    10 encoded weather values, 13 terrain values;
//! 2. 6 calendar encodings of day `t-1` (day of year, month, weekday);
//! 3. 10 encoded weather values of day `t`, standing in for a forecast.
//!
//! That is `29 * w + 16` values. Past pollutant readings never enter the
//! feature vector.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{CivilDate, DailySeries, Measurement, Pollutant, Station};
use crate::error::{Error, Result};
use crate::ingest::{
    BandSeries, PollutantSeries, StationDataset, WeatherSeries, SATELLITE_BANDS, WIND_DIR_INDEX,
};
use crate::raster::{LandCover, TopoProfile};
use crate::scalar::Scalar;

pub const SATELLITE_WIDTH: usize = 6;
pub const WEATHER_WIDTH: usize = 10;
pub const TOPO_WIDTH: usize = 13;
pub const DAY_WIDTH: usize = SATELLITE_WIDTH + WEATHER_WIDTH + TOPO_WIDTH;
pub const TEMPORAL_WIDTH: usize = 6;
pub const FORECAST_WIDTH: usize = WEATHER_WIDTH;

pub const DAY_OF_YEAR_PERIOD: u32 = 366;
pub const MONTH_PERIOD: u32 = 12;
pub const WEEKDAY_PERIOD: u32 = 7;

/// Encoded weather labels, in block order.
pub const WEATHER_FEATURES: [&str; WEATHER_WIDTH] = [
    "temp",
    "dewpoint",
    "humidity",
    "precip",
    "wind_speed",
    "wind_dir_sin",
    "wind_dir_cos",
    "pressure",
    "cloud_cover",
    "solar_rad",
];

pub const TEMPORAL_FEATURES: [&str; TEMPORAL_WIDTH] = [
    "doy_sin",
    "doy_cos",
    "month_sin",
    "month_cos",
    "dow_sin",
    "dow_cos",
];

/// Source tags every feature name starts with.
pub const FEATURE_SOURCES: [&str; 5] = ["sat_", "wx_", "topo_", "time_", "fcst_"];

pub fn feature_len(w: usize) -> usize {
    DAY_WIDTH * w + TEMPORAL_WIDTH + FORECAST_WIDTH
}

/// Wind direction in degrees to `(sin, cos)` of `pi * alpha / 180`.
pub fn encode_wind<T: Scalar>(alpha: T) -> Result<(T, T)> {
    if !(alpha >= T::zero() && alpha <= T::of(360.0)) {
        return Err(Error::Domain(format!(
            "wind direction {alpha} outside [0,360]"
        )));
    }
    let rad = T::PI() * alpha / T::of(180.0);
    Ok((rad.sin(), rad.cos()))
}

/// Cyclic feature `f` in `[0, period)` to `(sin, cos)` of `2 pi f / period`.
pub fn encode_cyclic<T: Scalar>(f: u32, period: u32) -> Result<(T, T)> {
    if period == 0 || f >= period {
        return Err(Error::Domain(format!(
            "cyclic value {f} outside [0,{period})"
        )));
    }
    let angle = T::of(2.0) * T::PI() * T::of(f64::from(f)) / T::of(f64::from(period));
    Ok((angle.sin(), angle.cos()))
}

/// Calendar encodings of `day`: day of year, month, weekday.
pub fn temporal_features<T: Scalar>(day: CivilDate) -> [T; TEMPORAL_WIDTH] {
    let pairs = [
        (day.day_of_year(), DAY_OF_YEAR_PERIOD),
        (day.month() - 1, MONTH_PERIOD),
        (day.weekday(), WEEKDAY_PERIOD),
    ];
    let mut out = [T::zero(); TEMPORAL_WIDTH];
    for (k, (f, p)) in pairs.into_iter().enumerate() {
        let (s, c) = encode_cyclic(f, p).expect("calendar values are in range");
        out[2 * k] = s;
        out[2 * k + 1] = c;
    }
    out
}

/// Nine raw weather values to the ten-value encoded block.
pub fn weather_block<T: Scalar>(raw: &[T; 9]) -> Result<[T; WEATHER_WIDTH]> {
    let (s, c) = encode_wind(raw[WIND_DIR_INDEX])?;
    let mut out = [T::zero(); WEATHER_WIDTH];
    out[..WIND_DIR_INDEX].copy_from_slice(&raw[..WIND_DIR_INDEX]);
    out[WIND_DIR_INDEX] = s;
    out[WIND_DIR_INDEX + 1] = c;
    out[WIND_DIR_INDEX + 2..].copy_from_slice(&raw[WIND_DIR_INDEX + 1..]);
    Ok(out)
}

/// Fills interior gaps linearly and edge gaps with the nearest observation.
/// Filled values are tagged [`crate::data::Quality::Interpolated`].
pub fn interpolate_gaps<T: Scalar>(series: &DailySeries<T>) -> Result<DailySeries<T>> {
    let vals = series.measurements();
    let known: Vec<usize> = (0..vals.len()).filter(|&i| vals[i].is_some()).collect();
    let (&first, &last) = match (known.first(), known.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::AllMissing),
    };
    let mut out = vals.to_vec();
    let value = |i: usize| vals[i].map(|m| m.value).expect("known index");
    for slot in out.iter_mut().take(first) {
        *slot = Some(Measurement::interpolated(value(first)));
    }
    for slot in out.iter_mut().skip(last + 1) {
        *slot = Some(Measurement::interpolated(value(last)));
    }
    for pair in known.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b - a < 2 {
            continue;
        }
        let (va, vb) = (value(a), value(b));
        let span = T::of_usize(b - a);
        for (k, slot) in out[a + 1..b].iter_mut().enumerate() {
            let frac = T::of_usize(k + 1) / span;
            *slot = Some(Measurement::interpolated(va + (vb - va) * frac));
        }
    }
    DailySeries::new(series.start(), out)
}

/// Per-feature min-max scaling learned from training rows.
///
/// `apply(x) = (x - min) / (max - min)`, or 0 for a constant column. Values
/// outside the training range are not clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Normalizer<T> {
    pub min: Vec<T>,
    pub max: Vec<T>,
}

impl<T: Scalar> Normalizer<T> {
    pub fn fit<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput)?.as_ref();
        let mut min = first.to_vec();
        let mut max = first.to_vec();
        for row in rows {
            let row = row.as_ref();
            if row.len() != min.len() {
                return Err(Error::DimensionMismatch {
                    expected: min.len(),
                    found: row.len(),
                });
            }
            for ((lo, hi), &v) in min.iter_mut().zip(max.iter_mut()).zip(row) {
                if v < *lo {
                    *lo = v;
                }
                if v > *hi {
                    *hi = v;
                }
            }
        }
        Ok(Normalizer { min, max })
    }

    /// Identity scaling for `n` features.
    pub fn identity(n: usize) -> Self {
        Normalizer {
            min: vec![T::zero(); n],
            max: vec![T::one(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.min.is_empty()
    }

    pub fn apply_value(&self, j: usize, x: T) -> T {
        let range = self.max[j] - self.min[j];
        if range == T::zero() {
            T::zero()
        } else {
            (x - self.min[j]) / range
        }
    }

    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: x.len(),
            });
        }
        Ok(x.iter()
            .enumerate()
            .map(|(j, &v)| self.apply_value(j, v))
            .collect())
    }
}

pub fn fit_normalizer<T: Scalar, R: AsRef<[T]>>(rows: &[R]) -> Result<Normalizer<T>> {
    Normalizer::fit(rows)
}

pub fn apply_normalizer<T: Scalar>(n: &Normalizer<T>, x: &[T]) -> Result<Vec<T>> {
    n.apply(x)
}

/// History length in days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WindowConfig {
    pub w: usize,
}

impl WindowConfig {
    pub fn new(w: usize) -> Result<Self> {
        if w == 0 {
            return Err(Error::Config("window length must be >= 1".into()));
        }
        Ok(WindowConfig { w })
    }
}

/// Ordered feature labels for window length `w`.
pub fn feature_names(w: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(feature_len(w));
    let topo: Vec<String> = ["alt_point", "alt_100m", "alt_1km"]
        .iter()
        .map(|s| s.to_string())
        .chain(LandCover::ALL.iter().map(|c| format!("lc_{c}")))
        .collect();
    for lag in (1..=w).rev() {
        names.extend(SATELLITE_BANDS.iter().map(|b| format!("sat_{b}_lag{lag}")));
        names.extend(WEATHER_FEATURES.iter().map(|v| format!("wx_{v}_lag{lag}")));
        names.extend(topo.iter().map(|t| format!("topo_{t}_lag{lag}")));
    }
    names.extend(TEMPORAL_FEATURES.iter().map(|t| format!("time_{t}")));
    names.extend(WEATHER_FEATURES.iter().map(|v| format!("fcst_{v}")));
    names
}

/// Builds one feature vector from its parts. `satellite` and `weather` hold
/// one entry per history day, oldest first; `last_day` is `t-1`.
pub fn assemble_features<T: Scalar>(
    satellite: &[[T; 6]],
    weather: &[[T; 9]],
    topo: &[T; TOPO_WIDTH],
    last_day: CivilDate,
    forecast: &[T; 9],
) -> Result<Vec<T>> {
    if satellite.len() != weather.len() {
        return Err(Error::LengthMismatch {
            left: satellite.len(),
            right: weather.len(),
        });
    }
    let w = satellite.len();
    let mut out = Vec::with_capacity(feature_len(w));
    for (sat, wx) in satellite.iter().zip(weather) {
        out.extend_from_slice(sat);
        out.extend_from_slice(&weather_block(wx)?);
        out.extend_from_slice(topo);
    }
    out.extend_from_slice(&temporal_features::<T>(last_day));
    out.extend_from_slice(&weather_block(forecast)?);
    Ok(out)
}

/// Gap-free inputs from which feature vectors are cut: interpolated
/// satellite series, complete weather, and terrain values per station.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureInputs {
    pub satellite: Vec<BandSeries>,
    pub weather: WeatherSeries,
    pub topo: Vec<[f64; TOPO_WIDTH]>,
}

impl FeatureInputs {
    pub fn new(
        stations: &[Station],
        satellite: &[BandSeries],
        weather: WeatherSeries,
        topo: &[TopoProfile<f64>],
    ) -> Result<Self> {
        let satellite = satellite
            .iter()
            .map(|bands| {
                let mut out = Vec::with_capacity(6);
                for s in bands {
                    out.push(interpolate_gaps(s)?);
                }
                Ok(out.try_into().expect("six bands"))
            })
            .collect::<Result<Vec<BandSeries>>>()?;
        let topo = stations
            .iter()
            .zip(topo)
            .map(|(s, t)| {
                t.feature_values()
                    .ok_or_else(|| Error::Domain(format!("station {} has no altitude data", s.id)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureInputs {
            satellite,
            weather,
            topo,
        })
    }

    pub fn from_dataset(ds: &StationDataset) -> Result<Self> {
        Self::new(&ds.stations, &ds.satellite, ds.weather.clone(), &ds.topo)
    }

    /// Features for station `si` predicting day `t`, or `None` if an input
    /// day falls outside the covered range.
    pub fn station_features(&self, si: usize, t: CivilDate, w: usize) -> Result<Option<Vec<f64>>> {
        let mut sat = Vec::with_capacity(w);
        let mut wx = Vec::with_capacity(w);
        for lag in (1..=w).rev() {
            let day = t.add_days(-(lag as i64));
            let mut bands = [0.0; 6];
            for (b, s) in bands.iter_mut().zip(&self.satellite[si]) {
                match s.value(day) {
                    Some(v) => *b = v,
                    None => return Ok(None),
                }
            }
            let Some(weather) = self.weather.day(day) else {
                return Ok(None);
            };
            sat.push(bands);
            wx.push(weather);
        }
        let Some(forecast) = self.weather.day(t) else {
            return Ok(None);
        };
        assemble_features(&sat, &wx, &self.topo[si], t.pred(), &forecast).map(Some)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSample {
    pub station_id: String,
    pub target_date: CivilDate,
    pub features: Vec<f64>,
    pub target: f64,
}

/// Samples sharing one feature layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub pollutant: Pollutant,
    pub window: usize,
    pub feature_names: Vec<String>,
    pub samples: Vec<WindowedSample>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn rows(&self) -> Vec<&[f64]> {
        self.samples.iter().map(|s| s.features.as_slice()).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.target).collect()
    }

    /// Copy keeping samples for which `keep` holds.
    pub fn filter(&self, keep: impl Fn(&WindowedSample) -> bool) -> SampleSet {
        SampleSet {
            pollutant: self.pollutant,
            window: self.window,
            feature_names: self.feature_names.clone(),
            samples: self.samples.iter().filter(|s| keep(s)).cloned().collect(),
        }
    }

    /// Writes `features.csv`: feature columns, then `target,station_id,date`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let name = path.display().to_string();
        let mut w = csv::Writer::from_path(path).map_err(|e| crate::raster::csv_error(&name, e))?;
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.extend(["target", "station_id", "date"]);
        w.write_record(&header)
            .map_err(|e| crate::raster::csv_error(&name, e))?;
        for s in &self.samples {
            let mut row: Vec<String> = s.features.iter().map(|v| v.to_string()).collect();
            row.push(s.target.to_string());
            row.push(s.station_id.clone());
            row.push(s.target_date.to_string());
            w.write_record(&row)
                .map_err(|e| crate::raster::csv_error(&name, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Sliding `w`-day windows with a one-day step, one sample per station
/// measuring `p` and target day `t >= start + w` with an observed reading.
pub fn build_windows(ds: &StationDataset, p: Pollutant, cfg: WindowConfig) -> Result<SampleSet> {
    let inputs = FeatureInputs::from_dataset(ds)?;
    build_windows_from(ds, &inputs, p, cfg)
}

pub fn build_windows_from(
    ds: &StationDataset,
    inputs: &FeatureInputs,
    p: Pollutant,
    cfg: WindowConfig,
) -> Result<SampleSet> {
    let w = cfg.w;
    let mut samples = Vec::new();
    for (si, st) in ds.stations.iter().enumerate() {
        let Some(target) = target_series(&ds.pollution[si], p) else {
            continue;
        };
        let mut t = ds.start.add_days(w as i64);
        while t <= ds.end {
            if let Some(y) = target.value(t) {
                if let Some(features) = inputs.station_features(si, t, w)? {
                    samples.push(WindowedSample {
                        station_id: st.id.clone(),
                        target_date: t,
                        features,
                        target: y,
                    });
                }
            }
            t = t.succ();
        }
    }
    if samples.is_empty() {
        return Err(Error::EmptyOutput(format!("{p} with w={w}")));
    }
    Ok(SampleSet {
        pollutant: p,
        window: w,
        feature_names: feature_names(w),
        samples,
    })
}

fn target_series(ps: &PollutantSeries, p: Pollutant) -> Option<&DailySeries<f64>> {
    ps[p.index()].as_ref()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Quality;

    fn d(s: &str) -> CivilDate {
        s.parse().unwrap()
    }

    fn close(a: (f64, f64), b: (f64, f64)) -> bool {
        (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12
    }

    #[test]
    fn wind_examples() {
        assert!(close(encode_wind(0.0).unwrap(), (0.0, 1.0)));
        assert!(close(encode_wind(90.0).unwrap(), (1.0, 0.0)));
        assert!(close(encode_wind(360.0).unwrap(), (0.0, 1.0)));
        assert!(encode_wind(360.5f64).is_err());
        assert!(encode_wind(-1.0f64).is_err());
        assert!(encode_wind(f64::NAN).is_err());
    }

    #[test]
    fn cyclic_examples() {
        for p in [366, 12, 7] {
            assert!(close(encode_cyclic(0, p).unwrap(), (0.0, 1.0)));
        }
        assert!(close(encode_cyclic(183, 366).unwrap(), (0.0, -1.0)));
        assert!(close(encode_cyclic(3, 12).unwrap(), (1.0, 0.0)));
        assert!(encode_cyclic::<f64>(12, 12).is_err());
    }

    fn series(vals: &[Option<f64>]) -> DailySeries<f64> {
        DailySeries::from_options(d("2020-01-01"), vals).unwrap()
    }

    fn values(s: &DailySeries<f64>) -> Vec<f64> {
        s.measurements().iter().map(|m| m.unwrap().value).collect()
    }

    #[test]
    fn interpolation_examples() {
        let s = interpolate_gaps(&series(&[Some(1.0), None, Some(3.0)])).unwrap();
        assert_eq!(values(&s), [1.0, 2.0, 3.0]);
        assert_eq!(s.measurements()[1].unwrap().quality, Quality::Interpolated);
        assert_eq!(s.measurements()[0].unwrap().quality, Quality::Observed);

        let s = interpolate_gaps(&series(&[Some(1.0), None, None, Some(4.0)])).unwrap();
        assert_eq!(values(&s), [1.0, 2.0, 3.0, 4.0]);

        let s = interpolate_gaps(&series(&[None, Some(2.0), Some(3.0)])).unwrap();
        assert_eq!(values(&s), [2.0, 2.0, 3.0]);

        let s = interpolate_gaps(&series(&[Some(2.0), Some(3.0), None])).unwrap();
        assert_eq!(values(&s), [2.0, 3.0, 3.0]);

        assert!(matches!(
            interpolate_gaps(&series(&[None, None])),
            Err(Error::AllMissing)
        ));
    }

    #[test]
    fn normalizer_examples() {
        let n = Normalizer::fit(&[[2.0], [4.0], [6.0]]).unwrap();
        assert_eq!(n.apply(&[4.0]).unwrap(), [0.5]);
        assert_eq!(n.apply(&[8.0]).unwrap(), [1.5]);
        let c = Normalizer::fit(&[[3.0], [3.0]]).unwrap();
        assert_eq!(c.apply(&[3.0]).unwrap(), [0.0]);
        assert_eq!(c.apply(&[10.0]).unwrap(), [0.0]);
        assert!(n.apply(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn names_match_length() {
        for w in [1, 7, 14] {
            let names = feature_names(w);
            assert_eq!(names.len(), feature_len(w));
            assert_eq!(names.len(), 29 * w + 16);
        }
        assert_eq!(feature_len(7), 219);
        let names = feature_names(2);
        assert_eq!(names[0], "sat_no2_lag2");
        assert_eq!(names[29], "sat_no2_lag1");
        assert_eq!(names[58], "time_doy_sin");
        assert_eq!(names.last().unwrap(), "fcst_solar_rad");
    }

    #[test]
    fn weather_block_inserts_wind_pair() {
        let raw: [f64; 9] = [1.0, 2.0, 3.0, 4.0, 5.0, 90.0, 7.0, 8.0, 9.0];
        let b = weather_block(&raw).unwrap();
        assert_eq!(&b[..5], &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!((b[5] - 1.0).abs() < 1e-15 && b[6].abs() < 1e-15);
        assert_eq!(&b[7..], &[7.0, 8.0, 9.0]);
    }

    #[test]
    fn temporal_uses_zero_based_origins() {
        let t = temporal_features::<f64>(d("2024-01-01"));
        // Jan 1, January, Monday: all angles zero
        assert_eq!(t, [0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }
}
