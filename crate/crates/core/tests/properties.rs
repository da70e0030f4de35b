use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use gasfc::calendar::{classify_day, easter_date, is_holiday, is_non_working, similar_day, CivilDate, DayClass};
use gasfc::ensemble::{
    fit_subset_average, fit_subset_average_traced, fit_svr_stack, fit_weighted_average, simple_average, Ensemble, ForecastPanel,
};
use gasfc::models::{ForecasterSpec, Kernel, SvrSpec};

fn any_date() -> impl Strategy<Value = CivilDate> {
    (0i64..365 * 40).prop_map(|k| CivilDate::ymd(1990, 1, 1).add_days(k))
}

proptest! {
    #[test]
    fn similar_day_constraints(t in any_date()) {
        let s = similar_day(t).unwrap();
        prop_assert_eq!(s.year(), t.year() - 1);
        if !is_holiday(t) {
            prop_assert_eq!(s.weekday(), t.weekday());
            prop_assert!(!is_holiday(s));
        } else {
            prop_assert!(is_holiday(s));
        }
    }

    #[test]
    fn classes_follow_definitions(d in any_date()) {
        let class = classify_day(d);
        match class {
            DayClass::Holiday => prop_assert!(is_holiday(d)),
            DayClass::Weekend => prop_assert!(d.is_weekend() && !is_holiday(d)),
            DayClass::Bridge => prop_assert!(!is_non_working(d) && is_non_working(d.pred()) && is_non_working(d.succ())),
            DayClass::DayAfterHoliday => prop_assert!(!is_non_working(d) && is_holiday(d.pred())),
            DayClass::Ordinary => prop_assert!(!is_non_working(d)),
        }
    }

    #[test]
    fn easter_is_spring_sunday(y in 1583i32..=4099) {
        let e = easter_date(y).unwrap();
        prop_assert_eq!(e.weekday(), chrono::Weekday::Sun);
        prop_assert!(e.month() == 3 || e.month() == 4);
        prop_assert_eq!(easter_date(y).unwrap(), e);
    }
}

fn panel_strategy() -> impl Strategy<Value = ForecastPanel> {
    (1usize..6, 8usize..40).prop_flat_map(|(m, n)| {
        (prop::collection::vec(-50.0f64..50.0, n * m), prop::collection::vec(-50.0f64..50.0, n)).prop_map(move |(f, y)| {
            ForecastPanel::new(
                (0..n).map(|k| CivilDate::ymd(2017, 1, 1).add_days(k as i64)).collect(),
                (0..m).map(|j| format!("m{j}")).collect(),
                DMatrix::from_row_slice(n, m, &f),
                Some(DVector::from_vec(y)),
            )
            .unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_on_simplex(p in panel_strategy()) {
        let w = fit_weighted_average(&p).unwrap();
        prop_assert!(w.weights.iter().all(|v| *v >= 0.0));
        prop_assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn averages_stay_inside_row_range(p in panel_strategy()) {
        let m = p.n_models();
        let subset = fit_subset_average(&p, 1.max(m / 2)).unwrap();
        let fits = [
            Ensemble::SimpleAverage,
            Ensemble::WeightedAverage { weights: fit_weighted_average(&p).unwrap() },
            Ensemble::SubsetAverage { weights: subset },
        ];
        for e in &fits {
            let pred = e.predict(&p.forecasts).unwrap();
            for i in 0..p.n_rows() {
                let row = p.forecasts.row(i);
                let (lo, hi) = (row.min(), row.max());
                let slack = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
                prop_assert!(pred[i] >= lo - slack && pred[i] <= hi + slack, "{} row {i}", e.name());
            }
        }
    }

    #[test]
    fn every_pruning_step_drops_the_worse_member(p in panel_strategy()) {
        let fit = fit_subset_average_traced(&p, 1).unwrap();
        prop_assert_eq!(fit.steps.len(), p.n_models() - 1);
        for s in &fit.steps {
            let (a, b) = s.pair;
            let worse = if s.mae.0 > s.mae.1 { a } else { b };
            prop_assert_eq!(s.dropped, worse);
        }
    }

    #[test]
    fn aggregators_are_deterministic(p in panel_strategy()) {
        prop_assert_eq!(fit_weighted_average(&p).unwrap(), fit_weighted_average(&p).unwrap());
        prop_assert_eq!(fit_subset_average(&p, 1).unwrap(), fit_subset_average(&p, 1).unwrap());
    }
}

fn fixed_panel(cols: &[Vec<f64>], y: &[f64]) -> ForecastPanel {
    let n = y.len();
    ForecastPanel::new(
        (0..n).map(|k| CivilDate::ymd(2017, 1, 1).add_days(k as i64)).collect(),
        (0..cols.len()).map(|j| format!("m{j}")).collect(),
        DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]),
        Some(DVector::from_column_slice(y)),
    )
    .unwrap()
}

#[test]
fn exact_column_gets_all_weight_like_grid_oracle() {
    let n = 50;
    let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() * 10.0 + 20.0).collect();
    let noise = |k: u64| -> Vec<f64> {
        (0..n).map(|i| (((i as u64 * 2654435761 + k * 97) % 1000) as f64 / 1000.0 - 0.5) * 8.0 + 20.0).collect()
    };
    let cols = vec![noise(1), y.clone(), noise(2)];
    let p = fixed_panel(&cols, &y);
    let w = fit_weighted_average(&p).unwrap().weights;
    let sse = |w: &[f64]| -> f64 { (0..n).map(|i| (y[i] - (0..3).map(|j| w[j] * cols[j][i]).sum::<f64>()).powi(2)).sum() };
    let mut best = (f64::INFINITY, vec![]);
    for a in 0..=100 {
        for b in 0..=(100 - a) {
            let g = [a as f64 / 100.0, b as f64 / 100.0, (100 - a - b) as f64 / 100.0];
            let v = sse(&g);
            if v < best.0 {
                best = (v, g.to_vec());
            }
        }
    }
    assert_eq!(best.1, vec![0.0, 1.0, 0.0]);
    assert!((w[1] - 1.0).abs() < 1e-6, "{w:?}");
    assert!(sse(&w) <= best.0 + 1e-9);
}

#[test]
fn stack_on_exact_column_stays_in_tube() {
    let n = 60;
    let y: Vec<f64> = (0..n).map(|i| 5.0 + (i as f64 * 0.21).cos() * 3.0).collect();
    let other: Vec<f64> = (0..n).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
    let p = fixed_panel(&[y.clone(), other], &y);
    let eps = 0.01;
    let mut spec = SvrSpec::new(100.0, eps, Kernel::Linear);
    spec.tol = 1e-8;
    let model = fit_svr_stack(&p, &ForecasterSpec::Svr(spec)).unwrap();
    let pred = model.predict(&p.forecasts).unwrap();
    for i in 0..n {
        assert!((pred[i] - y[i]).abs() <= eps + 1e-6, "row {i}: {} vs {}", pred[i], y[i]);
    }
}

#[test]
fn single_exact_column_stacks_to_target() {
    let y: Vec<f64> = (0..30).map(|i| i as f64 * 0.5 - 3.0).collect();
    let p = fixed_panel(&[y.clone()], &y);
    let mut spec = SvrSpec::new(10.0, 1e-3, Kernel::Linear);
    spec.tol = 1e-8;
    let pred = fit_svr_stack(&p, &ForecasterSpec::Svr(spec)).unwrap().predict(&p.forecasts).unwrap();
    assert!(pred.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-2));
    assert_eq!(simple_average(&p.forecasts).as_slice(), y.as_slice());
}
