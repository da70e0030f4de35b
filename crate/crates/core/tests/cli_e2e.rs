use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use gasfc::backtest::{mae, BacktestReport, NATIONAL};
use gasfc::dataset::SeriesKind;
use gasfc::ensemble::ENSEMBLE_NAMES;
use gasfc::synthgen::SynthSpec;

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = gasfc::cli::run(args.iter().copied(), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn ok(args: &[&str]) -> String {
    let (code, out, err) = run(args);
    assert_eq!(code, 0, "{args:?}: {err}");
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthesizes 2014..2018 for every series and writes a small run config.
fn setup(dir: &Path, test_years: &[i32]) -> PathBuf {
    let mut paths = serde_json::Map::new();
    for (kind, seed) in [(SeriesKind::Residential, 7), (SeriesKind::Industrial, 8), (SeriesKind::Thermoelectric, 9)] {
        let mut spec = serde_json::to_value(SynthSpec::preset(kind, seed)).unwrap();
        spec["start"] = "2014-01-01".into();
        spec["end"] = "2018-12-31".into();
        let spec_path = dir.join(format!("{}.json", kind.code()));
        fs::write(&spec_path, spec.to_string()).unwrap();
        let csv = dir.join(format!("{}.csv", kind.code()));
        ok(&["gasfc", "synth", "--config", s(&spec_path), "--out", s(&csv)]);
        paths.insert(kind.code().into(), format!("{}.csv", kind.code()).into());
    }
    let config = serde_json::json!({
        "series_paths": paths,
        "test_years": test_years,
        "models": ["ridge", "lasso", "knn"],
        "seed": 5,
        "out_dir": "out",
        "forecast_model": "weighted_average",
        "grids": {"svr_stack": {"c": [1.0], "epsilon_scale": [0.05], "gamma_scale": []}}
    });
    let path = dir.join("run.json");
    fs::write(&path, config.to_string()).unwrap();
    path
}

fn read_panel(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn backtest_forecast_and_features_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path(), &[2018]);
    let out = dir.path().join("out");
    let printed = ok(&["gasfc", "backtest", "--config", s(&config)]);

    let report = BacktestReport::read_csv(fs::File::open(out.join("report.csv")).unwrap()).unwrap();
    let models: Vec<&str> = ["ridge", "lasso", "knn"].into_iter().chain(ENSEMBLE_NAMES).collect();
    assert_eq!(report.rows.len(), 4 * models.len());
    for series in ["RGD", "IGD", "TGD", NATIONAL] {
        for m in &models {
            assert!(report.get(series, m, 2018).is_some(), "{series} {m}");
        }
    }

    // reported MAE equals MAE recomputed from the persisted panels
    let mut gd_sum: BTreeMap<usize, f64> = BTreeMap::new();
    for series in ["RGD", "IGD", "TGD", NATIONAL] {
        let (header, rows) = read_panel(&out.join("forecasts").join(format!("{series}_2018_test.csv")));
        assert_eq!(header.first().map(String::as_str), Some("date"));
        assert_eq!(header.last().map(String::as_str), Some("target"));
        assert_eq!(rows.len(), 365);
        let target: Vec<f64> = rows.iter().map(|r| *r.last().unwrap()).collect();
        for (j, name) in header[1..header.len() - 1].iter().enumerate() {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let m = mae(&target, &col).unwrap();
            let reported = report.get(series, name, 2018).unwrap();
            assert!((m - reported).abs() < 1e-12, "{series} {name}: {m} vs {reported}");
        }
        if series != NATIONAL {
            for (i, t) in target.iter().enumerate() {
                *gd_sum.entry(i).or_default() += t;
            }
        } else {
            for (i, t) in target.iter().enumerate() {
                assert!((gd_sum[&i] - t).abs() < 1e-9);
            }
        }
    }

    // printed table average equals the single year
    let line = printed.lines().find(|l| l.starts_with("ridge")).unwrap();
    let cells: Vec<f64> = line.split_whitespace().skip(1).map(|v| v.parse().unwrap()).collect();
    assert_eq!(cells.len(), 2);
    assert_eq!(cells[0], cells[1]);

    let fc = ok(&["gasfc", "forecast", "--config", s(&config), "--date", "2018-12-31"]);
    let values: BTreeMap<String, f64> = fc
        .lines()
        .map(|l| {
            let (k, v) = l.split_once(' ').unwrap();
            (k.to_string(), v.parse().unwrap())
        })
        .collect();
    assert_eq!(values.keys().map(String::as_str).collect::<Vec<_>>(), vec!["GD", "IGD", "RGD", "TGD"]);
    assert!(values.values().all(|v| v.is_finite()));
    assert!((values["RGD"] + values["IGD"] + values["TGD"] - values["GD"]).abs() < 1e-9);
    assert_eq!(fc, ok(&["gasfc", "forecast", "--config", s(&config), "--date", "2018-12-31"]));

    let (code, _, err) = run(&["gasfc", "forecast", "--config", s(&config), "--date", "2014-01-03"]);
    assert_eq!(code, 1, "{err}");
    assert!(!err.is_empty());

    let feats = dir.path().join("features");
    ok(&["gasfc", "features", "--config", s(&config), "--out", s(&feats)]);
    for kind in ["RGD", "IGD", "TGD"] {
        let text = fs::read_to_string(feats.join(format!("features_{kind}.csv"))).unwrap();
        assert!(text.lines().count() > 365 * 3, "{kind}");
    }
}

#[test]
fn test_year_without_history_fails() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path(), &[2015]);
    let (code, _, err) = run(&["gasfc", "backtest", "--config", s(&config)]);
    assert_eq!(code, 1, "{err}");
    assert!(err.contains("2015"), "{err}");
}

#[test]
fn synth_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(&spec, serde_json::to_string(&SynthSpec::preset(SeriesKind::Industrial, 42)).unwrap()).unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    ok(&["gasfc", "synth", "--config", s(&spec), "--out", s(&a)]);
    ok(&["gasfc", "synth", "--config", s(&spec), "--out", s(&b), "--seed", "42"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let series = gasfc::dataset::load_series(fs::File::open(&a).unwrap(), SeriesKind::Industrial).unwrap();
    assert_eq!(series.len(), 4383);
}

#[test]
fn bad_inputs_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"test_years":[2018],"seed":1,"bogus":true}"#).unwrap();
    assert_eq!(run(&["gasfc", "backtest", "--config", s(&cfg), "--out", "x"]).0, 2);
    fs::write(&cfg, r#"{"series_paths":{"RGD":"r.csv"},"test_years":[2018],"seed":1}"#).unwrap();
    assert_eq!(run(&["gasfc", "forecast", "--config", s(&cfg), "--date", "2018-02-30", "--out", "x"]).0, 2);
    assert_eq!(run(&["gasfc", "backtest", "--config", s(&cfg), "--out", "x", "--jobs", "0"]).0, 2);
}
