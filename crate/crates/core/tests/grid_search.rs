use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};

use gasfc::backtest::{cv_score, grid_search_cv, CvPlan};
use gasfc::models::{ForecasterSpec, TrainedForecaster};
use gasfc::synthgen::SplitMix64;

fn ridge(lambda: f64) -> ForecasterSpec {
    ForecasterSpec::Ridge { lambda }
}

#[test]
fn contiguous_folds_cover_rows_once() {
    let plan = CvPlan::contiguous(23, 5).unwrap();
    let lens: Vec<usize> = plan.folds.iter().map(|f| f.len()).collect();
    assert_eq!(lens, vec![5, 5, 5, 4, 4]);
    let mut all: Vec<usize> = plan.folds.iter().flat_map(|f| f.clone()).collect();
    all.sort();
    assert_eq!(all, (0..23).collect::<Vec<_>>());
    assert_eq!(plan.training_rows(0), (5..23).collect::<Vec<_>>());
    assert!(CvPlan::contiguous(4, 5).is_err());
}

#[test]
fn cv_score_matches_manual_folds() {
    let mut rng = SplitMix64::new(3);
    let x = DMatrix::from_fn(40, 3, |_, _| rng.next_normal());
    let y = DVector::from_fn(40, |i, _| x[(i, 0)] - 2.0 * x[(i, 2)] + rng.next_normal());
    let plan = CvPlan::contiguous(40, 5).unwrap();
    let scaled = [true; 3];
    let got = cv_score(&ridge(0.5), &x, &y, &scaled, &plan).unwrap();

    let mut total = 0.0;
    for k in 0..5 {
        let held: Vec<usize> = (8 * k..8 * k + 8).collect();
        let train: Vec<usize> = (0..40).filter(|i| !held.contains(i)).collect();
        let m = TrainedForecaster::fit(&ridge(0.5), &x.select_rows(&train), &y.select_rows(&train), &scaled).unwrap();
        let p = m.predict(&x.select_rows(&held)).unwrap();
        total += held.iter().zip(p.iter()).map(|(&i, v)| (y[i] - v).abs()).sum::<f64>() / 8.0;
    }
    assert_relative_eq!(got, total / 5.0, max_relative = 1e-12);
}

/// With beta ~ N(0, tau^2) and noise N(0, sigma^2) the Bayes-optimal
/// ridge penalty is sigma^2 / tau^2 on unstandardized data.
#[test]
fn cv_recovers_generating_penalty() {
    let (n, p) = (60, 40);
    let (tau, sigma) = (1.0, 10f64.sqrt());
    let grid = [1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0];
    let mut picks = Vec::new();
    for seed in 0..9 {
        let mut rng = SplitMix64::new(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.next_normal());
        let beta = DVector::from_fn(p, |_, _| tau * rng.next_normal());
        let noise = DVector::from_fn(n, |_, _| sigma * rng.next_normal());
        let y = &x * beta + noise;
        let specs: Vec<ForecasterSpec> = grid.iter().map(|&l| ridge(l)).collect();
        let plan = CvPlan::contiguous(n, 5).unwrap();
        let out = grid_search_cv(&specs, &x, &y, &vec![false; p], &plan).unwrap();
        let ForecasterSpec::Ridge { lambda } = out.best else { unreachable!() };
        picks.push(lambda);
    }
    picks.sort_by(f64::total_cmp);
    let median = picks[picks.len() / 2];
    assert!((1.0..=100.0).contains(&median), "picks {picks:?}");
}

#[test]
fn ties_go_to_the_earlier_candidate() {
    let x = DMatrix::from_fn(20, 1, |i, _| i as f64);
    let y = DVector::from_fn(20, |i, _| 2.0 * i as f64 + 1.0);
    let plan = CvPlan::contiguous(20, 5).unwrap();
    let specs = vec![ridge(1e-9), ridge(1e-9), ridge(1e-9)];
    let out = grid_search_cv(&specs, &x, &y, &[false], &plan).unwrap();
    assert_eq!(out.scores.len(), 3);
    assert_eq!(out.scores[0], out.scores[2]);
    assert_eq!(out.best, specs[0]);
}

#[test]
fn failing_candidates_are_dropped() {
    let x = DMatrix::from_fn(20, 1, |i, _| i as f64);
    let y = DVector::from_fn(20, |i, _| i as f64);
    let plan = CvPlan::contiguous(20, 5).unwrap();
    let specs = vec![ridge(-1.0), ridge(0.1)];
    let out = grid_search_cv(&specs, &x, &y, &[false], &plan).unwrap();
    assert_eq!(out.scores[0], None);
    assert_eq!(out.best, specs[1]);
    assert!(grid_search_cv(&specs[..1], &x, &y, &[false], &plan).is_err());
}
