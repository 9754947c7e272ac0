//! Dataset-wide consistency checks.
//!
//! Malformed files are rejected with a schema error while parsing. Everything
//! else (negative readings, dangling station ids, gaps) is collected into a
//! [`ValidationReport`]; missing values are counted, never rejected.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use crate::data::{CivilDate, Station};
use crate::error::Result;
use crate::ingest::{
    read_pollution_records, read_satellite_records, read_stations, read_weather_records,
    DatasetPaths, PollutionRecord, SatelliteRecord, SatelliteSource, WeatherRecord,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coverage {
    pub source: String,
    pub start: Option<CivilDate>,
    pub end: Option<CivilDate>,
    pub rows: usize,
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub source: String,
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub coverage: Vec<Coverage>,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn total_missing(&self) -> usize {
        self.coverage.iter().map(|c| c.missing).sum()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.coverage {
            let range = match (c.start, c.end) {
                (Some(s), Some(e)) => format!("{s}..{e}"),
                _ => "empty".to_string(),
            };
            writeln!(
                f,
                "{:<10} {range:<24} rows={} missing={}",
                c.source, c.rows, c.missing
            )?;
        }
        if self.violations.is_empty() {
            writeln!(f, "no violations")
        } else {
            writeln!(f, "{} violation(s):", self.violations.len())?;
            for v in &self.violations {
                writeln!(f, "  {}:{}: {}", v.source, v.line, v.message)?;
            }
            Ok(())
        }
    }
}

fn range(dates: impl Iterator<Item = CivilDate>) -> (Option<CivilDate>, Option<CivilDate>) {
    dates.fold((None, None), |(lo, hi), d| {
        (
            Some(lo.map_or(d, |l: CivilDate| l.min(d))),
            Some(hi.map_or(d, |h: CivilDate| h.max(d))),
        )
    })
}

fn span_days(start: Option<CivilDate>, end: Option<CivilDate>) -> usize {
    match (start, end) {
        (Some(s), Some(e)) => (e.days_since(s) + 1) as usize,
        _ => 0,
    }
}

pub fn validate_dataset(
    stations: &[Station],
    pollution: &[PollutionRecord],
    satellite: &[SatelliteRecord],
    weather: &[WeatherRecord],
) -> ValidationReport {
    let mut violations = Vec::new();
    let by_id: HashMap<&str, &Station> = stations.iter().map(|s| (s.id.as_str(), s)).collect();

    for (i, s) in stations.iter().enumerate() {
        let line = i as u64 + 2;
        if !(-180.0..=180.0).contains(&s.lon) {
            violations.push(Violation {
                source: "stations".into(),
                line,
                message: format!("station {} longitude {} outside [-180,180]", s.id, s.lon),
            });
        }
        if !(-90.0..=90.0).contains(&s.lat) {
            violations.push(Violation {
                source: "stations".into(),
                line,
                message: format!("station {} latitude {} outside [-90,90]", s.id, s.lat),
            });
        }
    }

    // pollution
    let mut present = HashSet::new();
    for r in pollution {
        match by_id.get(r.station_id.as_str()) {
            None => violations.push(Violation {
                source: "pollution".into(),
                line: r.line,
                message: format!("unknown station id {}", r.station_id),
            }),
            Some(st) if !st.measures(r.pollutant) => violations.push(Violation {
                source: "pollution".into(),
                line: r.line,
                message: format!(
                    "station {} is not declared to measure {}",
                    r.station_id, r.pollutant
                ),
            }),
            Some(_) => {}
        }
        if let Some(v) = r.value {
            if v < 0.0 {
                violations.push(Violation {
                    source: "pollution".into(),
                    line: r.line,
                    message: format!(
                        "negative concentration {v} for {} {} {}",
                        r.station_id, r.pollutant, r.date
                    ),
                });
            }
            present.insert((r.station_id.as_str(), r.pollutant, r.date));
        }
    }
    let (ps, pe) = range(pollution.iter().map(|r| r.date));
    let expected: usize =
        stations.iter().map(|s| s.measured.len()).sum::<usize>() * span_days(ps, pe);
    let observed = present
        .iter()
        .filter(|(id, p, _)| by_id.get(id).is_some_and(|s| s.measures(*p)))
        .count();
    let mut coverage = vec![Coverage {
        source: "pollution".into(),
        start: ps,
        end: pe,
        rows: pollution.len(),
        missing: expected.saturating_sub(observed),
    }];

    // satellite
    let mut sat_present = 0usize;
    let mut sat_seen = HashSet::new();
    for r in satellite {
        if !by_id.contains_key(r.station_id.as_str()) {
            violations.push(Violation {
                source: "satellite".into(),
                line: r.line,
                message: format!("unknown station id {}", r.station_id),
            });
            continue;
        }
        if sat_seen.insert((r.station_id.as_str(), r.date)) {
            sat_present += r.bands.iter().filter(|b| b.is_some()).count();
        }
    }
    let (ss, se) = range(satellite.iter().map(|r| r.date));
    coverage.push(Coverage {
        source: "satellite".into(),
        start: ss,
        end: se,
        rows: satellite.len(),
        missing: (stations.len() * 6 * span_days(ss, se)).saturating_sub(sat_present),
    });

    // weather
    let (ws, we) = range(weather.iter().map(|r| r.date));
    let days: HashSet<CivilDate> = weather.iter().map(|r| r.date).collect();
    let weather_missing = span_days(ws, we).saturating_sub(days.len());
    if let (Some(s), Some(e)) = (ws, we) {
        for d in s.iter_to(e).filter(|d| !days.contains(d)) {
            violations.push(Violation {
                source: "weather".into(),
                line: 0,
                message: format!("no weather row for {d}"),
            });
        }
    }
    coverage.push(Coverage {
        source: "weather".into(),
        start: ws,
        end: we,
        rows: weather.len(),
        missing: weather_missing * 9,
    });

    ValidationReport {
        coverage,
        violations,
    }
}

/// Parses every input file and validates the result.
pub fn validate_files(paths: &DatasetPaths) -> Result<ValidationReport> {
    let stations = read_stations(&paths.stations)?;
    let pollution = read_pollution_records(&paths.pollution)?;
    let satellite = match &paths.satellite {
        SatelliteSource::Csv(p) => read_satellite_records(p)?,
        SatelliteSource::Rasters(_) => Vec::new(),
    };
    let weather = read_weather_records(&paths.weather)?;
    let mut report = validate_dataset(&stations, &pollution, &satellite, &weather);
    if let SatelliteSource::Rasters(_) = &paths.satellite {
        report.coverage.retain(|c| c.source != "satellite");
    }
    Ok(report)
}
