use airq_core::cv::loyo_cv;
use airq_core::features::{build_windows, feature_len, WindowConfig};
use airq_core::fixtures::{generate_fixture, FixtureSpec, PlantedTarget};
use airq_core::ingest::load_dataset;
use airq_core::metrics::mae;
use airq_core::validate::validate_files;
use airq_core::{LearnerConfig, Model, ModelKind, Pollutant};

#[test]
fn planted_linear_target_is_recovered_by_ols() {
    let dir = tempfile::tempdir().unwrap();
    let spec = FixtureSpec {
        target: PlantedTarget::Linear,
        noise: 0.0,
        satellite_missing: 0.0,
        pollution_missing: 0.0,
        raster_days: 0,
        ..Default::default()
    };
    let out = generate_fixture(&spec, dir.path()).unwrap();
    let ds = load_dataset(&out.paths).unwrap();
    for p in Pollutant::ALL {
        let set = build_windows(&ds, p, WindowConfig::new(1).unwrap()).unwrap();
        let rows = set.rows();
        let y = set.targets();
        let m = Model::fit(
            ModelKind::Ols,
            p,
            1,
            set.feature_names.clone(),
            &rows,
            &y,
            &LearnerConfig::default(),
        )
        .unwrap();
        let err = mae(&m.predict(&rows).unwrap(), &y).unwrap();
        assert!(err < 1e-8, "{p}: training MAE {err}");
    }
}

#[test]
fn zero_missingness_validates_clean() {
    let dir = tempfile::tempdir().unwrap();
    let spec = FixtureSpec {
        satellite_missing: 0.0,
        pollution_missing: 0.0,
        ..Default::default()
    };
    let out = generate_fixture(&spec, dir.path()).unwrap();
    let report = validate_files(&out.paths).unwrap();
    assert!(report.is_clean(), "{report}");
    assert_eq!(report.total_missing(), 0);
}

#[test]
fn default_fixture_has_no_violations_but_some_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let out = generate_fixture(&FixtureSpec::default(), dir.path()).unwrap();
    let report = validate_files(&out.paths).unwrap();
    assert!(report.violations.is_empty(), "{report}");
    assert!(report.total_missing() > 0);
}

#[test]
fn sample_counts_follow_window_and_dropped_targets() {
    let dir = tempfile::tempdir().unwrap();
    let out = generate_fixture(&FixtureSpec::default(), dir.path()).unwrap();
    let ds = load_dataset(&out.paths).unwrap();
    let days = ds.n_days();
    for w in [1, 7, 14] {
        for p in Pollutant::ALL {
            let set = build_windows(&ds, p, WindowConfig::new(w).unwrap()).unwrap();
            assert!(set
                .samples
                .iter()
                .all(|s| s.features.len() == feature_len(w)));
            assert_eq!(feature_len(w), 29 * w + 16);
            for (si, st) in ds.stations.iter().enumerate() {
                let n = set.samples.iter().filter(|s| s.station_id == st.id).count();
                let expected = match &ds.pollution[si][p.index()] {
                    None => 0,
                    Some(series) => {
                        let dropped = ds
                            .start
                            .add_days(w as i64)
                            .iter_to(ds.end)
                            .filter(|&d| series.value(d).is_none())
                            .count();
                        days - w - dropped
                    }
                };
                assert_eq!(n, expected, "{p} w={w} station {}", st.id);
            }
        }
    }
}

#[test]
fn threshold_target_favours_boosting() {
    let dir = tempfile::tempdir().unwrap();
    let out = generate_fixture(&FixtureSpec::default(), dir.path()).unwrap();
    let ds = load_dataset(&out.paths).unwrap();
    let set = build_windows(&ds, Pollutant::Pm10, WindowConfig::new(1).unwrap()).unwrap();
    let cfg = LearnerConfig::default();
    let ols = loyo_cv(&set, ModelKind::Ols, &cfg).unwrap();
    let gbt = loyo_cv(&set, ModelKind::Gbt, &cfg).unwrap();
    assert_eq!(ols.folds.len(), 2);
    assert!(
        gbt.aggregate.mae < ols.aggregate.mae,
        "gbt {} vs ols {}",
        gbt.aggregate.mae,
        ols.aggregate.mae
    );
}
