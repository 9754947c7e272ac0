use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use airq_core::models::linalg::{lstsq_min_norm, ColMatrix};
use airq_core::models::tree::{best_split, PresortedColumns};
use airq_core::models::{
    fit_gbt, fit_ols, fit_sgd, sgd_sample_gradient, sgd_sample_loss, GbtConfig, LinearModel,
    SgdConfig,
};

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect())
        .collect()
}

#[test]
fn ols_recovers_planted_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..20 {
        let p = 1 + trial % 8;
        let n = p + 5 + trial;
        let x = random_matrix(&mut rng, n, p);
        let w: Vec<f64> = (0..p).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let b = rng.gen_range(-10.0..10.0);
        let y: Vec<f64> = x
            .iter()
            .map(|r| b + r.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>())
            .collect();
        let m = fit_ols(&x, &y).unwrap();
        for (got, want) in m.weights.iter().zip(&w) {
            assert!((got - want).abs() < 1e-10, "weight {got} vs {want}");
        }
        assert!((m.intercept - b).abs() < 1e-10);
    }
}

/// Pseudoinverse oracle from an independent SVD implementation.
fn pinv_solve(rows: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = rows.len();
    let p = rows[0].len();
    let a = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let pinv = a.pseudo_inverse(1e-10).unwrap();
    (pinv * nalgebra::DVector::from_column_slice(b))
        .as_slice()
        .to_vec()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn min_norm_solution_matches_pseudoinverse(
        seed in any::<u64>(),
        n in 1usize..12,
        p in 1usize..12,
        rank_drop in 0usize..3,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = random_matrix(&mut rng, n, p);
        // duplicate columns to force rank deficiency
        for k in 0..rank_drop.min(p.saturating_sub(1)) {
            for r in rows.iter_mut() {
                r[p - 1 - k] = r[0] * (k as f64 + 2.0);
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let got = lstsq_min_norm(&ColMatrix::from_rows(&rows), &b);
        let want = pinv_solve(&rows, &b);
        let scale = want.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-8 * scale, "{g} vs {w}");
        }
    }

    #[test]
    fn ols_residuals_are_orthogonal_to_columns(seed in any::<u64>(), n in 3usize..30, p in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_matrix(&mut rng, n, p);
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let m = fit_ols(&x, &y).unwrap();
        let resid: Vec<f64> = x.iter().zip(&y).map(|(r, &t)| m.predict_one(r) - t).collect();
        let scale = y.iter().fold(1.0f64, |a, v| a.max(v.abs())) * n as f64;
        prop_assert!(resid.iter().sum::<f64>().abs() < 1e-9 * scale);
        for j in 0..p {
            let dot: f64 = x.iter().zip(&resid).map(|(r, e)| r[j] * e).sum();
            prop_assert!(dot.abs() < 1e-8 * scale, "column {j}: {dot}");
        }
    }
}

#[test]
fn sgd_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let p = rng.gen_range(1..8);
        let model = LinearModel {
            weights: (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            intercept: rng.gen_range(-2.0..2.0),
        };
        let x: Vec<f64> = (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let y = rng.gen_range(-5.0..5.0);
        let l2 = [0.0, 0.01, 0.5][rng.gen_range(0..3)];
        let (gw, gb) = sgd_sample_gradient(&model, &x, y, l2);
        let h = 1e-6;
        let check = |analytic: f64, plus: LinearModel<f64>, minus: LinearModel<f64>| {
            let fd = (sgd_sample_loss(&plus, &x, y, l2) - sgd_sample_loss(&minus, &x, y, l2))
                / (2.0 * h);
            let denom = analytic.abs().max(fd.abs()).max(1e-3);
            assert!(
                (analytic - fd).abs() / denom < 1e-6,
                "analytic {analytic} vs fd {fd}"
            );
        };
        for (j, &g) in gw.iter().enumerate() {
            let mut plus = model.clone();
            plus.weights[j] += h;
            let mut minus = model.clone();
            minus.weights[j] -= h;
            check(g, plus, minus);
        }
        let mut plus = model.clone();
        plus.intercept += h;
        let mut minus = model.clone();
        minus.intercept -= h;
        check(gb, plus, minus);
    }
}

#[test]
fn sgd_first_step_follows_the_gradient() {
    let x = vec![vec![1.0, -2.0, 0.5]];
    let y = [3.0];
    let cfg = SgdConfig {
        initial_rate: 0.1,
        epochs: 1,
        l2: 0.2,
        seed: 9,
    };
    let m = fit_sgd(&x, &y, &cfg).unwrap();
    let (gw, gb) = sgd_sample_gradient(&LinearModel::zeros(3), &x[0], 3.0, 0.2);
    for (w, g) in m.weights.iter().zip(&gw) {
        assert_eq!(*w, -0.1 * g);
    }
    assert_eq!(m.intercept, -0.1 * gb);
}

#[test]
fn sgd_converges_on_well_conditioned_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_matrix(&mut rng, 200, 3);
    let y: Vec<f64> = x
        .iter()
        .map(|r| 1.0 + 0.5 * r[0] - 0.25 * r[1] + 0.1 * r[2])
        .collect();
    let m = fit_sgd(&x, &y, &SgdConfig::default()).unwrap();
    assert!((m.weights[0] - 0.5).abs() < 1e-3);
    assert!((m.intercept - 1.0).abs() < 1e-3);
}

#[test]
fn gbt_training_mse_never_increases() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let n = rng.gen_range(20..80);
        let p = rng.gen_range(1..6);
        let x = random_matrix(&mut rng, n, p);
        let y: Vec<f64> = x
            .iter()
            .map(|r| {
                r[0].sin() * 3.0
                    + if r[p - 1] > 0.5 { 2.0 } else { -1.0 }
                    + rng.gen_range(-0.5..0.5)
            })
            .collect();
        let cfg = GbtConfig {
            n_trees: 40,
            learning_rate: rng.gen_range(0.05..1.0),
            max_depth: rng.gen_range(1..4),
            min_samples_leaf: rng.gen_range(1..4),
        };
        let m = fit_gbt(&x, &y, &cfg).unwrap();
        let mse = |k: usize| {
            x.iter()
                .zip(&y)
                .map(|(r, t)| (m.predict_stages(r, k) - t).powi(2))
                .sum::<f64>()
                / n as f64
        };
        let mut prev = mse(0);
        for k in 1..=cfg.n_trees {
            let cur = mse(k);
            assert!(
                cur <= prev * (1.0 + 1e-12) + 1e-12,
                "stage {k}: {cur} > {prev}"
            );
            prev = cur;
        }
    }
}

#[test]
fn gbt_fits_xor_with_depth_two() {
    let x = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
    let y = [0.0, 1.0, 1.0, 0.0];
    let cfg = GbtConfig {
        n_trees: 1,
        learning_rate: 1.0,
        max_depth: 2,
        min_samples_leaf: 1,
    };
    let m = fit_gbt(&x, &y, &cfg).unwrap();
    for (r, t) in x.iter().zip(&y) {
        assert_eq!(m.predict_one(r), *t);
    }
}

fn sse(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Brute force over every feature and every observed value as a cut.
    #[test]
    fn best_split_matches_brute_force(
        rows in prop::collection::vec(prop::collection::vec(0u8..4, 3), 2..=8),
        p in 1usize..=3,
        y in prop::collection::vec(-5i32..5, 8),
        min_leaf in 1usize..3,
    ) {
        let x: Vec<Vec<f64>> = rows.iter().map(|r| r[..p].iter().map(|&v| v as f64).collect()).collect();
        let n = x.len();
        let y: Vec<f64> = y[..n].iter().map(|&v| v as f64).collect();
        let data = PresortedColumns::new(&x);
        let got = best_split(&data, &y, &vec![true; n], n, min_leaf);
        let parent = sse(&y);
        let mut best: Option<(f64, usize)> = None;
        for f in 0..p {
            let mut cuts: Vec<f64> = x.iter().map(|r| r[f]).collect();
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            for c in cuts.iter().take(cuts.len().saturating_sub(1)) {
                let (l, r): (Vec<f64>, Vec<f64>) = (0..n).map(|i| (x[i][f] <= *c, y[i])).fold(
                    (vec![], vec![]),
                    |(mut l, mut r), (left, v)| {
                        if left { l.push(v) } else { r.push(v) }
                        (l, r)
                    },
                );
                if l.len() < min_leaf || r.len() < min_leaf {
                    continue;
                }
                let gain = parent - sse(&l) - sse(&r);
                if best.is_none_or(|(g, _)| gain > g + 1e-9) {
                    best = Some((gain, f));
                }
            }
        }
        match (got, best) {
            (None, None) => {}
            (Some(s), Some((g, _))) => {
                prop_assert!((s.gain - g).abs() < 1e-9, "gain {} vs {}", s.gain, g);
                // the chosen split must itself achieve the optimal gain
                let (l, r): (Vec<f64>, Vec<f64>) = (0..n).map(|i| (x[i][s.feature] <= s.threshold, y[i])).fold(
                    (vec![], vec![]),
                    |(mut l, mut r), (left, v)| {
                        if left { l.push(v) } else { r.push(v) }
                        (l, r)
                    },
                );
                prop_assert!((parent - sse(&l) - sse(&r) - g).abs() < 1e-9);
                prop_assert!(l.len() >= min_leaf && r.len() >= min_leaf);
            }
            (a, b) => prop_assert!(false, "split {:?} vs oracle {:?}", a, b),
        }
    }
}
