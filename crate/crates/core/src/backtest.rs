//! Rolling yearly evaluation: cross-validated tuning on the training
//! years, ensembles fitted on the validation year, scoring on the test
//! year, and the national total composed from the three components.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calendar::{CivilDate, DateRange};
use crate::dataset::{make_split, merge_train_validation, DailySeries, SeriesKind, SplitPlan};
use crate::ensemble::{
    fit_subset_average, fit_svr_stack, fit_weighted_average, tune_subset_size, Ensemble, ForecastPanel,
    ENSEMBLE_NAMES,
};
use crate::error::{Error, Result};
use crate::features::{build_full_matrix, FeatureMatrix};
use crate::models::grid::GridConfig;
use crate::models::standardize::target_scale;
use crate::models::{ForecasterSpec, ModelKind, TrainedForecaster};

pub const CV_FOLDS: usize = 5;
pub const REPORT_FORMAT_VERSION: u32 = 1;
pub const REPORT_HEADER: [&str; 4] = ["series", "model", "test_year", "mae_mscm"];
pub const NATIONAL: &str = "GD";

/// Mean absolute error.
pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch { expected: y.len(), found: yhat.len() });
    }
    if y.is_empty() {
        return Err(Error::InvalidParameter("mae of an empty vector".into()));
    }
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

/// Seed for one unit of work, independent of scheduling order.
///
/// FNV-1a over the little-endian base seed and each part (parts separated
/// by `0xff`), passed through the SplitMix64 finalizer.
pub fn derive_seed(base: u64, parts: &[&str]) -> u64 {
    const PRIME: u64 = 0x0000_0100_0000_01B3;
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    let mut eat = |byte: u8| {
        h ^= byte as u64;
        h = h.wrapping_mul(PRIME);
    };
    base.to_le_bytes().into_iter().for_each(&mut eat);
    for part in parts {
        eat(0xff);
        part.bytes().for_each(&mut eat);
    }
    let mut z = h;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Contiguous, chronological validation blocks whose sizes differ by at
/// most one (earlier blocks take the remainder).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CvPlan {
    pub folds: Vec<Range<usize>>,
}

impl CvPlan {
    pub fn contiguous(n: usize, k: usize) -> Result<Self> {
        if k < 2 || n < k {
            return Err(Error::InsufficientHistory(format!("{n} rows cannot form {k} folds")));
        }
        let (base, extra) = (n / k, n % k);
        let mut folds = Vec::with_capacity(k);
        let mut start = 0;
        for f in 0..k {
            let len = base + usize::from(f < extra);
            folds.push(start..start + len);
            start += len;
        }
        Ok(CvPlan { folds })
    }

    pub fn n_rows(&self) -> usize {
        self.folds.last().map_or(0, |f| f.end)
    }

    /// Rows outside fold `f`, in order.
    pub fn training_rows(&self, f: usize) -> Vec<usize> {
        let held = &self.folds[f];
        (0..self.n_rows()).filter(|i| !held.contains(i)).collect()
    }
}

/// Mean out-of-fold MAE of `spec`.
pub fn cv_score(spec: &ForecasterSpec, x: &DMatrix<f64>, y: &DVector<f64>, scaled: &[bool], plan: &CvPlan) -> Result<f64> {
    if plan.n_rows() != x.nrows() {
        return Err(Error::LengthMismatch { expected: plan.n_rows(), found: x.nrows() });
    }
    let mut total = 0.0;
    for (f, held) in plan.folds.iter().enumerate() {
        let train = plan.training_rows(f);
        let test: Vec<usize> = held.clone().collect();
        let model = TrainedForecaster::fit(spec, &x.select_rows(&train), &y.select_rows(&train), scaled)?;
        let pred = model.predict(&x.select_rows(&test))?;
        total += mae(y.select_rows(&test).as_slice(), pred.as_slice())?;
    }
    Ok(total / plan.folds.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub best: ForecasterSpec,
    pub best_score: f64,
    /// Score of every candidate; `None` where a fold fit failed.
    pub scores: Vec<Option<f64>>,
}

/// Candidate with the lowest mean out-of-fold MAE; ties go to the earlier
/// candidate and candidates with any failing fold are dropped.
pub fn grid_search_cv(
    specs: &[ForecasterSpec],
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    scaled: &[bool],
    plan: &CvPlan,
) -> Result<CvOutcome> {
    if specs.is_empty() {
        return Err(Error::InvalidParameter("empty hyperparameter grid".into()));
    }
    let results: Vec<Result<f64>> = specs.par_iter().map(|s| cv_score(s, x, y, scaled, plan)).collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in results.iter().enumerate() {
        if let Ok(score) = r {
            if best.is_none_or(|(_, b)| *score < b) {
                best = Some((i, *score));
            }
        }
    }
    let Some((i, best_score)) = best else {
        let reasons: Vec<String> = results.iter().filter_map(|r| r.as_ref().err().map(|e| e.to_string())).collect();
        return Err(Error::AllCandidatesFailed(reasons.first().cloned().unwrap_or_default()));
    };
    Ok(CvOutcome { best: specs[i].clone(), best_score, scores: results.into_iter().map(|r| r.ok()).collect() })
}

fn default_models() -> Vec<ModelKind> {
    ModelKind::ALL.to_vec()
}

fn default_forecast_model() -> String {
    "weighted_average".into()
}

/// Backtest configuration as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub series_paths: BTreeMap<SeriesKind, PathBuf>,
    pub test_years: Vec<i32>,
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    #[serde(default)]
    pub grids: GridConfig,
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Model used by `forecast`: a base model or an ensemble name.
    #[serde(default = "default_forecast_model")]
    pub forecast_model: String,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.test_years.is_empty() {
            return Err(Error::InvalidParameter("test_years is empty".into()));
        }
        if self.models.is_empty() {
            return Err(Error::InvalidParameter("models is empty".into()));
        }
        let mut seen = self.models.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.models.len() {
            return Err(Error::InvalidParameter("models lists a family twice".into()));
        }
        if !self.model_names().contains(&self.forecast_model) {
            return Err(Error::UnknownModel(self.forecast_model.clone()));
        }
        Ok(())
    }

    /// Base model names followed by the ensembles, in report order.
    pub fn model_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.models.iter().map(|m| m.name().to_string()).collect();
        names.extend(ENSEMBLE_NAMES.iter().map(|s| s.to_string()));
        names
    }
}

/// Fails when any training date reaches into the test range.
pub fn check_no_leakage(dates: &[CivilDate], test: DateRange, what: &str) -> Result<()> {
    match dates.iter().find(|d| **d >= test.start) {
        Some(d) => Err(Error::Leakage(format!("{what} uses {d}, test starts {}", test.start))),
        None => Ok(()),
    }
}

/// Everything fitted and forecast for one series and test year.
#[derive(Debug, Clone, PartialEq)]
pub struct YearRun {
    pub kind: SeriesKind,
    pub plan: SplitPlan,
    /// Tuned spec per base model, with its CV score.
    pub tuned: Vec<(ModelKind, ForecasterSpec, f64)>,
    /// Base models refit on training plus validation.
    pub refit: Vec<TrainedForecaster>,
    pub ensembles: Vec<Ensemble>,
    /// Base forecasts of the train-only fits on the validation year.
    pub validation: ForecastPanel,
    /// Test-year forecasts of every base model and ensemble, with actuals.
    pub test: ForecastPanel,
}

impl YearRun {
    pub fn maes(&self) -> Result<Vec<f64>> {
        let y = self.test.target()?;
        (0..self.test.n_models()).map(|j| mae(y.as_slice(), self.test.forecasts.column(j).as_slice())).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub series: String,
    pub model: String,
    pub test_year: i32,
    pub mae_mscm: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BacktestReport {
    pub rows: Vec<ReportRow>,
}

impl BacktestReport {
    pub fn get(&self, series: &str, model: &str, year: i32) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.series == series && r.model == model && r.test_year == year)
            .map(|r| r.mae_mscm)
    }

    /// Mean over test years per model for one series, in report order.
    pub fn averages(&self, series: &str) -> Vec<(String, f64)> {
        let mut order: Vec<String> = Vec::new();
        let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.series == series) {
            if !acc.contains_key(&r.model) {
                order.push(r.model.clone());
            }
            let e = acc.entry(r.model.clone()).or_insert((0.0, 0));
            e.0 += r.mae_mscm;
            e.1 += 1;
        }
        order.into_iter().map(|m| { let (s, n) = acc[&m]; (m, s / n as f64) }).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(REPORT_HEADER)?;
        for r in &self.rows {
            w.write_record([r.series.clone(), r.model.clone(), r.test_year.to_string(), r.mae_mscm.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(source: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(source);
        let rows = rdr.deserialize().collect::<std::result::Result<Vec<ReportRow>, _>>()?;
        Ok(BacktestReport { rows })
    }
}

/// Whole-run result.
#[derive(Debug, Clone, PartialEq)]
pub struct BacktestOutput {
    pub runs: Vec<YearRun>,
    /// National test forecasts per year (sum of the three components).
    pub national: Vec<(i32, ForecastPanel)>,
    pub report: BacktestReport,
}

fn panel_from(dates: &[CivilDate], names: Vec<String>, columns: &[DVector<f64>], target: &DVector<f64>) -> Result<ForecastPanel> {
    let f = DMatrix::from_columns(columns);
    ForecastPanel::new(dates.to_vec(), names, f, Some(target.clone()))
}

fn tune_and_fit(
    kind: ModelKind,
    cfg: &RunConfig,
    series: SeriesKind,
    plan: &SplitPlan,
    train: &FeatureMatrix,
    val: &FeatureMatrix,
    trval: &FeatureMatrix,
    test: &FeatureMatrix,
) -> Result<((ModelKind, ForecasterSpec, f64), DVector<f64>, TrainedForecaster, DVector<f64>)> {
    let scaled = train.scale_mask();
    let (_, target_std) = target_scale(train.target.as_slice());
    let seed = derive_seed(cfg.seed, &[series.code(), &plan.test_year.to_string(), kind.name()]);
    let specs = cfg.grids.resolve(kind, train.n_cols(), target_std, seed);
    check_no_leakage(&train.dates, plan.test, "cross-validation")?;
    let cv = grid_search_cv(&specs, &train.values, &train.target, &scaled, &CvPlan::contiguous(train.n_rows(), CV_FOLDS)?)?;
    let model = TrainedForecaster::fit(&cv.best, &train.values, &train.target, &scaled)?;
    let val_forecast = model.predict(&val.values)?;
    check_no_leakage(&trval.dates, plan.test, "refit")?;
    let refit = TrainedForecaster::fit(&cv.best, &trval.values, &trval.target, &scaled)?;
    let test_forecast = refit.predict(&test.values)?;
    Ok(((kind, cv.best, cv.best_score), val_forecast, refit, test_forecast))
}

fn fit_ensembles(panel: &ForecastPanel, cfg: &RunConfig, plan: &SplitPlan) -> Result<Vec<Ensemble>> {
    check_no_leakage(&panel.dates, plan.test, "ensemble")?;
    let simple = Ensemble::SimpleAverage;
    let weighted = Ensemble::WeightedAverage { weights: fit_weighted_average(panel).map_err(|e| e.context("weighted_average"))? };
    let nested_rows = panel.dates.iter().filter(|d| d.month() <= 9).count();
    let size = tune_subset_size(panel, nested_rows).map_err(|e| e.context("subset_average"))?;
    let subset = Ensemble::SubsetAverage { weights: fit_subset_average(panel, size).map_err(|e| e.context("subset_average"))? };
    let y = panel.target()?;
    let (_, target_std) = target_scale(y.as_slice());
    let specs = cfg.grids.resolve_stack(panel.n_models(), target_std);
    let scaled = vec![true; panel.n_models()];
    let stack = (|| {
        let cv = grid_search_cv(&specs, &panel.forecasts, y, &scaled, &CvPlan::contiguous(panel.n_rows(), CV_FOLDS)?)?;
        Ok::<_, Error>(Ensemble::SvrStack { model: fit_svr_stack(panel, &cv.best)? })
    })()
    .map_err(|e| e.context("svr_stack"))?;
    Ok(vec![simple, subset, weighted, stack])
}

fn run_year(series: &DailySeries, full: &FeatureMatrix, cfg: &RunConfig, year: i32) -> Result<YearRun> {
    let kind = series.kind();
    let plan = make_split(series, year)?;
    let train = full.rows_in(plan.train);
    let val = full.rows_in(plan.validation);
    let trval = full.rows_in(merge_train_validation(&plan));
    let test = full.rows_in(plan.test);
    if train.n_rows() < CV_FOLDS || val.n_rows() != plan.validation.len() || test.n_rows() != plan.test.len() {
        return Err(Error::InsufficientHistory(format!("{kind} {year}: lag history does not cover the split")));
    }
    let fitted: Vec<_> = cfg
        .models
        .par_iter()
        .map(|&m| tune_and_fit(m, cfg, kind, &plan, &train, &val, &trval, &test).map_err(|e| e.context(m.name())))
        .collect::<Result<_>>()?;
    let mut tuned = Vec::new();
    let mut val_cols = Vec::new();
    let mut refit = Vec::new();
    let mut test_cols = Vec::new();
    for (t, v, r, f) in fitted {
        tuned.push(t);
        val_cols.push(v);
        refit.push(r);
        test_cols.push(f);
    }
    let base_names: Vec<String> = cfg.models.iter().map(|m| m.name().to_string()).collect();
    let validation = panel_from(&val.dates, base_names.clone(), &val_cols, &val.target)?;
    let ensembles = fit_ensembles(&validation, cfg, &plan)?;
    let base_test = DMatrix::from_columns(&test_cols);
    for e in &ensembles {
        test_cols.push(e.predict(&base_test).map_err(|err| err.context(e.name()))?);
    }
    let test_panel = panel_from(&test.dates, cfg.model_names(), &test_cols, &test.target)?;
    Ok(YearRun { kind, plan, tuned, refit, ensembles, validation, test: test_panel })
}

/// Elementwise sum of component panels sharing dates and model names.
pub fn compose_national(components: &[&ForecastPanel]) -> Result<ForecastPanel> {
    let first = components.first().ok_or_else(|| Error::InvalidParameter("no components to compose".into()))?;
    let mut f = first.forecasts.clone();
    let mut y = first.target()?.clone();
    for c in &components[1..] {
        if c.dates != first.dates {
            return Err(Error::Misaligned("component forecasts cover different dates".into()));
        }
        if c.model_names != first.model_names {
            return Err(Error::Misaligned("component forecasts list different models".into()));
        }
        f += &c.forecasts;
        y += c.target()?;
    }
    ForecastPanel::new(first.dates.clone(), first.model_names.clone(), f, Some(y))
}

/// Runs every configured series and test year on the current rayon pool.
/// Results do not depend on the pool size.
pub fn run_backtest(series: &[DailySeries], cfg: &RunConfig) -> Result<BacktestOutput> {
    cfg.validate()?;
    let mut series: Vec<&DailySeries> = series.iter().collect();
    series.sort_by_key(|s| s.kind());
    if series.windows(2).any(|w| w[0].kind() == w[1].kind()) {
        return Err(Error::InvalidParameter("two series of the same kind".into()));
    }
    let fulls: Vec<FeatureMatrix> = series
        .iter()
        .map(|s| build_full_matrix(s).map_err(|e| e.context(s.kind().code())))
        .collect::<Result<_>>()?;
    let units: Vec<(usize, i32)> = (0..series.len()).flat_map(|i| cfg.test_years.iter().map(move |&y| (i, y))).collect();
    let runs: Vec<YearRun> = units
        .par_iter()
        .map(|&(i, year)| {
            run_year(series[i], &fulls[i], cfg, year).map_err(|e| e.context(format!("{} {year}", series[i].kind())))
        })
        .collect::<Result<_>>()?;

    let mut report = BacktestReport::default();
    for run in &runs {
        for (name, m) in run.test.model_names.iter().zip(run.maes()?) {
            report.rows.push(ReportRow { series: run.kind.code().into(), model: name.clone(), test_year: run.plan.test_year, mae_mscm: m });
        }
    }
    let mut national = Vec::new();
    if SeriesKind::ALL.iter().all(|k| series.iter().any(|s| s.kind() == *k)) {
        for &year in &cfg.test_years {
            let parts: Vec<&ForecastPanel> = runs.iter().filter(|r| r.plan.test_year == year).map(|r| &r.test).collect();
            let gd = compose_national(&parts).map_err(|e| e.context(format!("{NATIONAL} {year}")))?;
            let y = gd.target()?;
            for (j, name) in gd.model_names.iter().enumerate() {
                let m = mae(y.as_slice(), gd.forecasts.column(j).as_slice())?;
                report.rows.push(ReportRow { series: NATIONAL.into(), model: name.clone(), test_year: year, mae_mscm: m });
            }
            national.push((year, gd));
        }
    }
    Ok(BacktestOutput { runs, national, report })
}

/// Runs on a dedicated pool of `jobs` threads.
pub fn run_backtest_with_jobs(series: &[DailySeries], cfg: &RunConfig, jobs: usize) -> Result<BacktestOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| run_backtest(series, cfg))
}

/// Serialized models for day-ahead use: the refit base models and the
/// ensembles of the latest test year of one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub kind: SeriesKind,
    pub test_year: i32,
    pub base_names: Vec<String>,
    pub base: Vec<TrainedForecaster>,
    pub ensembles: Vec<Ensemble>,
}

impl ModelBundle {
    pub fn from_run(run: &YearRun) -> Self {
        ModelBundle {
            format_version: REPORT_FORMAT_VERSION,
            kind: run.kind,
            test_year: run.plan.test_year,
            base_names: run.validation.model_names.clone(),
            base: run.refit.clone(),
            ensembles: run.ensembles.clone(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let b: ModelBundle = serde_json::from_str(s)?;
        if b.format_version != REPORT_FORMAT_VERSION {
            return Err(Error::FormatVersion(b.format_version));
        }
        for m in &b.base {
            if m.format_version != crate::models::MODEL_FORMAT_VERSION {
                return Err(Error::FormatVersion(m.format_version));
            }
        }
        Ok(b)
    }

    /// Forecast of `model` (base or ensemble name) for feature rows `x`.
    pub fn predict(&self, model: &str, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if let Some(i) = self.base_names.iter().position(|n| n == model) {
            return self.base[i].predict(x);
        }
        let e = self.ensembles.iter().find(|e| e.name() == model).ok_or_else(|| Error::UnknownModel(model.into()))?;
        let cols: Vec<DVector<f64>> = self.base.iter().map(|m| m.predict(x)).collect::<Result<_>>()?;
        e.predict(&DMatrix::from_columns(&cols))
    }
}
