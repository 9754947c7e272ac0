//! Leave-one-year-out cross-validation and result tables.
//!
//! Samples are assigned to folds by the calendar year of their target day.
//! Each fold fits normalizer and model on the other years and scores the held
//! out year; aggregates are the unweighted mean of the fold scores.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::data::Pollutant;
use crate::error::{Error, Result};
use crate::features::SampleSet;
use crate::metrics::{mae, mape, rmse};
use crate::models::{ForecastModel, LearnerConfig, ModelKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldSpec {
    pub test_year: i32,
    pub train_years: Vec<i32>,
}

/// One fold per distinct target year present in `set`.
pub fn fold_specs(set: &SampleSet) -> Result<Vec<FoldSpec>> {
    let years: BTreeSet<i32> = set.samples.iter().map(|s| s.target_date.year()).collect();
    if years.len() < 2 {
        return Err(Error::InsufficientYears(years.len()));
    }
    Ok(years
        .iter()
        .map(|&y| FoldSpec {
            test_year: y,
            train_years: years.iter().copied().filter(|&o| o != y).collect(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scores {
    pub mae: f64,
    /// `None` when every actual in the fold was ~0.
    pub mape: Option<f64>,
    pub rmse: f64,
    pub n_samples: usize,
    pub n_mape_excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub test_year: i32,
    pub n_train: usize,
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub pollutant: Pollutant,
    pub kind: ModelKind,
    pub window: usize,
    pub folds: Vec<FoldResult>,
    pub aggregate: Scores,
}

pub fn score(pred: &[f64], actual: &[f64]) -> Result<Scores> {
    let (m, excluded) = match mape(pred, actual) {
        Ok((m, e)) => (Some(m), e),
        Err(Error::AllExcluded) => (None, actual.len()),
        Err(e) => return Err(e),
    };
    Ok(Scores {
        mae: mae(pred, actual)?,
        mape: m,
        rmse: rmse(pred, actual)?,
        n_samples: pred.len(),
        n_mape_excluded: excluded,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Unweighted mean of fold scores; sample counts are summed.
pub fn aggregate(folds: &[FoldResult]) -> Scores {
    Scores {
        mae: mean(folds.iter().map(|f| f.scores.mae)).unwrap_or(f64::NAN),
        mape: mean(folds.iter().filter_map(|f| f.scores.mape)),
        rmse: mean(folds.iter().map(|f| f.scores.rmse)).unwrap_or(f64::NAN),
        n_samples: folds.iter().map(|f| f.scores.n_samples).sum(),
        n_mape_excluded: folds.iter().map(|f| f.scores.n_mape_excluded).sum(),
    }
}

/// Fits and scores one fold.
pub fn run_fold(
    set: &SampleSet,
    fold: &FoldSpec,
    kind: ModelKind,
    cfg: &LearnerConfig,
) -> Result<FoldResult> {
    let (test, train): (Vec<_>, Vec<_>) = set
        .samples
        .iter()
        .partition(|s| s.target_date.year() == fold.test_year);
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptyOutput(format!("fold {}", fold.test_year)));
    }
    let x: Vec<&[f64]> = train.iter().map(|s| s.features.as_slice()).collect();
    let y: Vec<f64> = train.iter().map(|s| s.target).collect();
    let model = ForecastModel::fit(
        kind,
        set.pollutant,
        set.window,
        set.feature_names.clone(),
        &x,
        &y,
        cfg,
    )?;
    let xt: Vec<&[f64]> = test.iter().map(|s| s.features.as_slice()).collect();
    let actual: Vec<f64> = test.iter().map(|s| s.target).collect();
    let pred = model.predict(&xt)?;
    Ok(FoldResult {
        test_year: fold.test_year,
        n_train: train.len(),
        scores: score(&pred, &actual)?,
    })
}

pub fn loyo_cv(set: &SampleSet, kind: ModelKind, cfg: &LearnerConfig) -> Result<CvReport> {
    let folds = fold_specs(set)?
        .iter()
        .map(|f| run_fold(set, f, kind, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(CvReport {
        pollutant: set.pollutant,
        kind,
        window: set.window,
        aggregate: aggregate(&folds),
        folds,
    })
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// `results.csv`: one row per fold plus an `ALL` row per report.
pub fn write_results_csv(reports: &[CvReport], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let err = |e| crate::raster::csv_error(&name, e);
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record([
        "pollutant",
        "model",
        "w",
        "fold_year",
        "mae",
        "mape",
        "rmse",
        "n_samples",
        "n_mape_excluded",
    ])
    .map_err(err)?;
    for r in reports {
        let rows = r
            .folds
            .iter()
            .map(|f| (f.test_year.to_string(), &f.scores))
            .chain(std::iter::once(("ALL".to_string(), &r.aggregate)));
        for (year, s) in rows {
            w.write_record([
                r.pollutant.to_string(),
                r.kind.to_string(),
                r.window.to_string(),
                year,
                s.mae.to_string(),
                fmt_metric(s.mape),
                s.rmse.to_string(),
                s.n_samples.to_string(),
                s.n_mape_excluded.to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub pollutant: Pollutant,
    pub kind: ModelKind,
    pub window: usize,
    pub mae: f64,
    pub mape: Option<f64>,
    pub rmse: f64,
}

/// Aggregate metrics for a pollutant x model x window grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub pollutants: Vec<Pollutant>,
    pub kinds: Vec<ModelKind>,
    pub windows: Vec<usize>,
    pub rows: Vec<TableRow>,
}

pub fn results_table(
    reports: &[CvReport],
    pollutants: &[Pollutant],
    kinds: &[ModelKind],
    windows: &[usize],
) -> Result<ResultsTable> {
    let by_key: BTreeMap<(Pollutant, ModelKind, usize), &CvReport> = reports
        .iter()
        .map(|r| ((r.pollutant, r.kind, r.window), r))
        .collect();
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for &p in pollutants {
        for &k in kinds {
            for &w in windows {
                match by_key.get(&(p, k, w)) {
                    Some(r) => rows.push(TableRow {
                        pollutant: p,
                        kind: k,
                        window: w,
                        mae: r.aggregate.mae,
                        mape: r.aggregate.mape,
                        rmse: r.aggregate.rmse,
                    }),
                    None => missing.push(format!("{p}/{}/w={w}", k.label())),
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingCell(missing));
    }
    Ok(ResultsTable {
        pollutants: pollutants.to_vec(),
        kinds: kinds.to_vec(),
        windows: windows.to_vec(),
        rows,
    })
}

impl ResultsTable {
    pub fn get(&self, p: Pollutant, k: ModelKind, w: usize) -> Option<&TableRow> {
        self.rows
            .iter()
            .find(|r| r.pollutant == p && r.kind == k && r.window == w)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let name = path.display().to_string();
        let err = |e| crate::raster::csv_error(&name, e);
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        w.write_record(["pollutant", "model", "w", "mae", "mape", "rmse"])
            .map_err(err)?;
        for r in &self.rows {
            w.write_record([
                r.pollutant.to_string(),
                r.kind.label().to_string(),
                r.window.to_string(),
                r.mae.to_string(),
                fmt_metric(r.mape),
                r.rmse.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Best (lowest) model per (pollutant, window, metric index).
    fn best(&self, p: Pollutant, w: usize, metric: usize) -> Option<ModelKind> {
        self.kinds
            .iter()
            .filter_map(|&k| {
                let r = self.get(p, k, w)?;
                let v = match metric {
                    0 => Some(r.mae),
                    1 => r.mape,
                    _ => Some(r.rmse),
                }?;
                Some((v, k))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, k)| k)
    }

    /// Aligned text rendering; the best model of each column is wrapped in `**`.
    pub fn render_text(&self) -> String {
        let cell_w = 13;
        let mut out = String::new();
        let _ = write!(out, "{:<10}{:<9}", "Pollutant", "Model");
        for w in &self.windows {
            let _ = write!(out, "| {:<width$}", format!("w = {w}"), width = 3 * cell_w);
        }
        out.push('\n');
        let _ = write!(out, "{:<19}", "");
        for _ in &self.windows {
            let _ = write!(
                out,
                "| {:<cell_w$}{:<cell_w$}{:<cell_w$}",
                "MAE", "MAPE", "RMSE"
            );
        }
        out.push('\n');
        for &p in &self.pollutants {
            for &k in &self.kinds {
                let _ = write!(out, "{:<10}{:<9}", p.as_str(), k.label());
                for &w in &self.windows {
                    out.push_str("| ");
                    let r = self.get(p, k, w).expect("table is complete");
                    for (m, v) in [Some(r.mae), r.mape, Some(r.rmse)].into_iter().enumerate() {
                        let text = v.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
                        let text = if self.best(p, w, m) == Some(k) {
                            format!("**{text}**")
                        } else {
                            text
                        };
                        let _ = write!(out, "{text:<cell_w$}");
                    }
                }
                out.push('\n');
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::CivilDate;
    use crate::features::WindowedSample;

    fn set(years: &[(i32, usize)]) -> SampleSet {
        let mut samples = Vec::new();
        for &(y, n) in years {
            let start = CivilDate::new(y, 1, 1).unwrap();
            for i in 0..n {
                let x = i as f64 + y as f64 * 0.1;
                samples.push(WindowedSample {
                    station_id: "S".into(),
                    target_date: start.add_days(i as i64),
                    features: vec![x],
                    target: 2.0 * x + 1.0,
                });
            }
        }
        SampleSet {
            pollutant: Pollutant::Pm10,
            window: 1,
            feature_names: vec!["x".into()],
            samples,
        }
    }

    #[test]
    fn one_fold_per_year() {
        let s = set(&[
            (2018, 5),
            (2019, 5),
            (2020, 5),
            (2021, 5),
            (2022, 5),
            (2023, 5),
        ]);
        let f = fold_specs(&s).unwrap();
        assert_eq!(f.len(), 6);
        for spec in &f {
            assert!(!spec.train_years.contains(&spec.test_year));
            assert_eq!(spec.train_years.len(), 5);
        }
    }

    #[test]
    fn two_years_two_folds() {
        let s = set(&[(2019, 6), (2020, 6)]);
        let r = loyo_cv(&s, ModelKind::Ols, &LearnerConfig::default()).unwrap();
        assert_eq!(r.folds.len(), 2);
        assert_eq!(r.folds[0].n_train, 6);
        assert!(r.aggregate.mae < 1e-9);
        assert_eq!(r.aggregate.n_samples, 12);
    }

    #[test]
    fn single_year_rejected() {
        let s = set(&[(2019, 6)]);
        assert!(matches!(fold_specs(&s), Err(Error::InsufficientYears(1))));
    }

    fn fake_report(p: Pollutant, k: ModelKind, w: usize, mae: f64) -> CvReport {
        let scores = Scores {
            mae,
            mape: Some(mae / 10.0),
            rmse: mae * 1.5,
            n_samples: 10,
            n_mape_excluded: 0,
        };
        CvReport {
            pollutant: p,
            kind: k,
            window: w,
            folds: vec![FoldResult {
                test_year: 2020,
                n_train: 10,
                scores: scores.clone(),
            }],
            aggregate: scores,
        }
    }

    #[test]
    fn full_grid_table() {
        let mut reports = Vec::new();
        for p in Pollutant::ALL {
            for k in ModelKind::ALL {
                for w in [1, 7, 14] {
                    reports.push(fake_report(p, k, w, 1.0 + k as usize as f64));
                }
            }
        }
        let t = results_table(&reports, &Pollutant::ALL, &ModelKind::ALL, &[1, 7, 14]).unwrap();
        assert_eq!(t.rows.len(), 45);
        let text = t.render_text();
        assert!(text.contains("**1.000**"));
        assert_eq!(text.lines().count(), 2 + 15);

        reports.remove(3);
        match results_table(&reports, &Pollutant::ALL, &ModelKind::ALL, &[1, 7, 14]) {
            Err(Error::MissingCell(cells)) => {
                assert_eq!(cells, vec!["PM10/GradBst/w=1".to_string()])
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
