//! Core value types: pollutants, calendar dates, stations and daily series.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// The five pollutants that make up the air quality index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pollutant {
    Pm10,
    Pm25,
    No2,
    So2,
    O3,
}

impl Pollutant {
    pub const ALL: [Pollutant; 5] = [
        Pollutant::Pm10,
        Pollutant::Pm25,
        Pollutant::No2,
        Pollutant::So2,
        Pollutant::O3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Pollutant::Pm10 => "PM10",
            Pollutant::Pm25 => "PM25",
            Pollutant::No2 => "NO2",
            Pollutant::So2 => "SO2",
            Pollutant::O3 => "O3",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Pollutant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pollutant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "PM10" => Ok(Pollutant::Pm10),
            "PM25" | "PM2.5" => Ok(Pollutant::Pm25),
            "NO2" => Ok(Pollutant::No2),
            "SO2" => Ok(Pollutant::So2),
            "O3" => Ok(Pollutant::O3),
            other => Err(Error::UnknownPollutant(other.to_string())),
        }
    }
}

impl Serialize for Pollutant {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Pollutant {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A proleptic Gregorian calendar day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CivilDate(NaiveDate);

impl CivilDate {
    pub fn new(year: i32, month: u32, day: u32) -> Result<Self> {
        NaiveDate::from_ymd_opt(year, month, day)
            .map(CivilDate)
            .ok_or_else(|| Error::Domain(format!("invalid date {year:04}-{month:02}-{day:02}")))
    }

    pub fn year(self) -> i32 {
        self.0.year()
    }

    pub fn month(self) -> u32 {
        self.0.month()
    }

    pub fn day(self) -> u32 {
        self.0.day()
    }

    /// Zero-based ordinal within the year: Jan 1 is 0, Dec 31 of a leap year is 365.
    pub fn day_of_year(self) -> u32 {
        self.0.ordinal0()
    }

    /// Zero-based day of week with Monday = 0.
    pub fn weekday(self) -> u32 {
        self.0.weekday().num_days_from_monday()
    }

    pub fn succ(self) -> Self {
        CivilDate(self.0.succ_opt().expect("date within chrono range"))
    }

    pub fn pred(self) -> Self {
        CivilDate(self.0.pred_opt().expect("date within chrono range"))
    }

    pub fn add_days(self, days: i64) -> Self {
        CivilDate(self.0 + chrono::Duration::days(days))
    }

    /// Signed number of days from `other` to `self`.
    pub fn days_since(self, other: CivilDate) -> i64 {
        (self.0 - other.0).num_days()
    }

    /// Inclusive iterator over `[self, end]`.
    pub fn iter_to(self, end: CivilDate) -> impl Iterator<Item = CivilDate> {
        let n = end.days_since(self).max(-1) + 1;
        (0..n).map(move |i| self.add_days(i))
    }
}

impl fmt::Display for CivilDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%d"))
    }
}

impl FromStr for CivilDate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
            .map(CivilDate)
            .map_err(|e| Error::Domain(format!("invalid ISO date `{s}`: {e}")))
    }
}

impl Serialize for CivilDate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CivilDate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn day_of_year(d: CivilDate) -> u32 {
    d.day_of_year()
}

pub fn weekday(d: CivilDate) -> u32 {
    d.weekday()
}

/// A monitoring station.
///
/// `lon`/`lat` are geographic degrees. Raster lookups need `xy`, the position
/// in the projected CRS (meters) the rasters use.
#[derive(Debug, Clone, PartialEq)]
pub struct Station {
    pub id: String,
    pub lon: f64,
    pub lat: f64,
    pub measured: Vec<Pollutant>,
    pub xy: Option<(f64, f64)>,
}

impl Station {
    pub fn measures(&self, p: Pollutant) -> bool {
        self.measured.contains(&p)
    }

    pub fn projected(&self) -> Result<(f64, f64)> {
        self.xy.ok_or_else(|| {
            Error::Config(format!(
                "station `{}` has no projected x/y coordinates; raster features need them",
                self.id
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quality {
    Observed,
    Interpolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement<T> {
    pub value: T,
    pub quality: Quality,
}

impl<T> Measurement<T> {
    pub fn observed(value: T) -> Self {
        Measurement {
            value,
            quality: Quality::Observed,
        }
    }

    pub fn interpolated(value: T) -> Self {
        Measurement {
            value,
            quality: Quality::Interpolated,
        }
    }
}

/// A gap-aware daily series; index `i` holds the reading for `start + i` days.
///
/// `None` marks a missing reading.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries<T> {
    start: CivilDate,
    values: Vec<Option<Measurement<T>>>,
}

impl<T: Copy> DailySeries<T> {
    pub fn new(start: CivilDate, values: Vec<Option<Measurement<T>>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(DailySeries { start, values })
    }

    /// All-missing series covering `[start, end]`.
    pub fn missing(start: CivilDate, end: CivilDate) -> Self {
        let len = (end.days_since(start) + 1).max(1) as usize;
        DailySeries {
            start,
            values: vec![None; len],
        }
    }

    /// Series of observed values.
    pub fn from_observed(start: CivilDate, values: &[T]) -> Result<Self> {
        Self::new(
            start,
            values
                .iter()
                .map(|&v| Some(Measurement::observed(v)))
                .collect(),
        )
    }

    /// Series from optional observed values; `None` is missing.
    pub fn from_options(start: CivilDate, values: &[Option<T>]) -> Result<Self> {
        Self::new(
            start,
            values
                .iter()
                .map(|v| v.map(Measurement::observed))
                .collect(),
        )
    }

    pub fn start(&self) -> CivilDate {
        self.start
    }

    pub fn end(&self) -> CivilDate {
        self.start.add_days(self.values.len() as i64 - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn date_at(&self, index: usize) -> CivilDate {
        self.start.add_days(index as i64)
    }

    pub fn index_of(&self, date: CivilDate) -> Option<usize> {
        let i = date.days_since(self.start);
        (i >= 0 && (i as usize) < self.values.len()).then_some(i as usize)
    }

    pub fn measurements(&self) -> &[Option<Measurement<T>>] {
        &self.values
    }

    pub fn get(&self, date: CivilDate) -> Option<Measurement<T>> {
        self.index_of(date).and_then(|i| self.values[i])
    }

    pub fn value(&self, date: CivilDate) -> Option<T> {
        self.get(date).map(|m| m.value)
    }

    pub fn set(&mut self, date: CivilDate, m: Option<Measurement<T>>) -> bool {
        match self.index_of(date) {
            Some(i) => {
                self.values[i] = m;
                true
            }
            None => false,
        }
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// Restricts the series to `[start, end]`, padding with missing readings
    /// where the window extends past the stored range.
    pub fn clip(&self, start: CivilDate, end: CivilDate) -> Self {
        let values = start.iter_to(end).map(|d| self.get(d)).collect();
        DailySeries { start, values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> CivilDate {
        s.parse().unwrap()
    }

    #[test]
    fn day_of_year_examples() {
        assert_eq!(day_of_year(d("2023-01-01")), 0);
        assert_eq!(day_of_year(d("2020-12-31")), 365);
        assert_eq!(day_of_year(d("2018-05-15")), 134);
    }

    #[test]
    fn weekday_examples() {
        assert_eq!(weekday(d("2024-01-01")), 0);
        assert_eq!(weekday(d("2024-01-07")), 6);
        let x = d("1999-03-17");
        assert_eq!(weekday(x), weekday(x.add_days(7)));
    }

    #[test]
    fn pollutant_set_is_closed() {
        assert_eq!(Pollutant::ALL.len(), 5);
        for p in Pollutant::ALL {
            assert_eq!(p.as_str().parse::<Pollutant>().unwrap(), p);
        }
        assert!(matches!(
            "CO2".parse::<Pollutant>(),
            Err(Error::UnknownPollutant(_))
        ));
    }

    #[test]
    fn invalid_dates_rejected() {
        assert!(CivilDate::new(2019, 2, 29).is_err());
        assert!(CivilDate::new(2020, 2, 29).is_ok());
        assert!("2020-13-01".parse::<CivilDate>().is_err());
    }

    #[test]
    fn series_clip_pads_with_missing() {
        let s = DailySeries::from_observed(d("2020-01-02"), &[1.0, 2.0]).unwrap();
        let c = s.clip(d("2020-01-01"), d("2020-01-04"));
        assert_eq!(c.len(), 4);
        assert_eq!(c.value(d("2020-01-01")), None);
        assert_eq!(c.value(d("2020-01-03")), Some(2.0));
        assert_eq!(c.value(d("2020-01-04")), None);
    }

    #[test]
    fn empty_series_rejected() {
        assert!(DailySeries::<f64>::new(d("2020-01-01"), vec![]).is_err());
    }
}
