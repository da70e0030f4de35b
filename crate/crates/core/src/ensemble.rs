//! Second-level aggregation of base forecasts: simple average, weighted
//! average on the simplex, average over a correlation-pruned subset, and
//! support vector regression stacked on the forecasts.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analysis::pearson;
use crate::backtest::mae;
use crate::calendar::CivilDate;
use crate::error::{ensure_finite, Error, Result};
use crate::models::{ForecasterSpec, TrainedForecaster};

/// Base forecasts aligned on one date index, one column per model.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastPanel {
    pub dates: Vec<CivilDate>,
    pub model_names: Vec<String>,
    pub forecasts: DMatrix<f64>,
    pub target: Option<DVector<f64>>,
}

impl ForecastPanel {
    pub fn new(
        dates: Vec<CivilDate>,
        model_names: Vec<String>,
        forecasts: DMatrix<f64>,
        target: Option<DVector<f64>>,
    ) -> Result<Self> {
        let (n, m) = forecasts.shape();
        if m == 0 {
            return Err(Error::InvalidParameter("panel needs at least one model".into()));
        }
        if dates.len() != n {
            return Err(Error::LengthMismatch { expected: n, found: dates.len() });
        }
        if model_names.len() != m {
            return Err(Error::LengthMismatch { expected: m, found: model_names.len() });
        }
        if let Some(t) = &target {
            if t.len() != n {
                return Err(Error::LengthMismatch { expected: n, found: t.len() });
            }
            ensure_finite(t.as_slice(), "panel target")?;
        }
        ensure_finite(forecasts.as_slice(), "panel forecasts")?;
        Ok(ForecastPanel { dates, model_names, forecasts, target })
    }

    pub fn n_models(&self) -> usize {
        self.forecasts.ncols()
    }

    pub fn n_rows(&self) -> usize {
        self.forecasts.nrows()
    }

    pub fn target(&self) -> Result<&DVector<f64>> {
        self.target
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("panel has no target".into()))
    }

    pub fn select_rows(&self, idx: &[usize]) -> ForecastPanel {
        ForecastPanel {
            dates: idx.iter().map(|&i| self.dates[i]).collect(),
            model_names: self.model_names.clone(),
            forecasts: self.forecasts.select_rows(idx),
            target: self.target.as_ref().map(|t| t.select_rows(idx)),
        }
    }

    /// `date,<model names...>,target`
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec!["date".to_string()];
        header.extend(self.model_names.iter().cloned());
        header.push("target".into());
        w.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec = vec![self.dates[i].to_string()];
            rec.extend(self.forecasts.row(i).iter().map(|v| v.to_string()));
            rec.push(self.target.as_ref().map(|t| t[i].to_string()).unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Non-negative weights summing to one, with the subset size for the
/// pruned average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleWeights {
    pub weights: Vec<f64>,
    pub subset_size: Option<usize>,
}

impl EnsembleWeights {
    pub fn uniform(m: usize) -> Self {
        EnsembleWeights { weights: vec![1.0 / m as f64; m], subset_size: None }
    }

    /// Weighted sum of the columns. Subset weights average the kept
    /// columns directly, so a full subset reproduces [`simple_average`].
    pub fn apply(&self, forecasts: &DMatrix<f64>) -> Result<DVector<f64>> {
        if forecasts.ncols() != self.weights.len() {
            return Err(Error::ColumnMismatch { expected: self.weights.len(), found: forecasts.ncols() });
        }
        if self.subset_size.is_some() {
            let kept: Vec<usize> = (0..self.weights.len()).filter(|&j| self.weights[j] > 0.0).collect();
            return Ok(simple_average(&forecasts.select_columns(&kept)));
        }
        Ok(forecasts * DVector::from_column_slice(&self.weights))
    }
}

/// Row-wise mean of the forecasts.
pub fn simple_average(forecasts: &DMatrix<f64>) -> DVector<f64> {
    let m = forecasts.ncols() as f64;
    DVector::from_iterator(forecasts.nrows(), forecasts.row_iter().map(|r| r.sum() / m))
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cumsum += uk;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Stop when the projected-gradient step moves no weight by more than this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { tol: 1e-8, max_iter: 100_000 }
    }
}

/// Largest eigenvalue of `H` restricted to the simplex tangent space
/// `{d : sum d = 0}`, the curvature bound along feasible directions.
fn tangent_curvature(h: &DMatrix<f64>) -> f64 {
    let m = h.nrows();
    if m < 2 {
        return 0.0;
    }
    let proj = DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { 0.0 } - 1.0 / m as f64);
    let ph = &proj * h * &proj;
    let sym = 0.5 * (&ph + ph.transpose());
    sym.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max)
}

/// Weights on the simplex minimizing `||y - F w||^2`.
///
/// Accelerated projected gradient from the uniform point, restarting the
/// momentum whenever the objective increases. Stops once a plain projected
/// gradient step from the current iterate moves no weight by more than
/// `opts.tol`.
pub fn fit_weighted_average_with(panel: &ForecastPanel, opts: &SimplexOptions) -> Result<EnsembleWeights> {
    let y = panel.target()?;
    let f = &panel.forecasts;
    let m = f.ncols();
    if m == 1 {
        return Ok(EnsembleWeights { weights: vec![1.0], subset_size: None });
    }
    let h = 2.0 * f.tr_mul(f);
    let b = 2.0 * f.tr_mul(y);
    let lipschitz = tangent_curvature(&h);
    let mut w = DVector::from_element(m, 1.0 / m as f64);
    if !(lipschitz > 0.0) {
        return Ok(EnsembleWeights { weights: w.iter().copied().collect(), subset_size: None });
    }
    let step = 1.0 / lipschitz;
    // objective up to the constant y'y
    let objective = |w: &DVector<f64>| 0.5 * w.dot(&(&h * w)) - b.dot(w);
    let pg_step = |w: &DVector<f64>| {
        let grad = &h * w - &b;
        DVector::from_vec(project_simplex((w - step * grad).as_slice()))
    };
    let mut prev = w.clone();
    let mut momentum = 1.0f64;
    let mut f_w = objective(&w);
    let mut stationarity = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let extrapolated = &w + ((momentum - 1.0) / next_momentum) * (&w - &prev);
        let mut next = pg_step(&extrapolated);
        let mut f_next = objective(&next);
        momentum = next_momentum;
        if f_next > f_w {
            momentum = 1.0;
            next = pg_step(&w);
            f_next = objective(&next);
        }
        prev = std::mem::replace(&mut w, next);
        f_w = f_next;
        stationarity = (pg_step(&w) - &w).amax();
        if stationarity <= opts.tol {
            return Ok(EnsembleWeights { weights: w.iter().copied().collect(), subset_size: None });
        }
    }
    Err(Error::NotConverged { solver: "simplex projected gradient", iterations: opts.max_iter, residual: stationarity })
}

pub fn fit_weighted_average(panel: &ForecastPanel) -> Result<EnsembleWeights> {
    fit_weighted_average_with(panel, &SimplexOptions::default())
}

/// One elimination of the subset search.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneStep {
    pub pair: (usize, usize),
    pub correlation: f64,
    pub mae: (f64, f64),
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetFit {
    pub weights: EnsembleWeights,
    pub kept: Vec<usize>,
    pub steps: Vec<PruneStep>,
}

/// Repeatedly takes the most correlated pair of remaining forecasts and
/// drops the member with the larger validation MAE until `subset_size`
/// columns remain; the result is the uniform average of the survivors.
pub fn fit_subset_average_traced(panel: &ForecastPanel, subset_size: usize) -> Result<SubsetFit> {
    let y = panel.target()?;
    let m = panel.n_models();
    if subset_size == 0 || subset_size > m {
        return Err(Error::InvalidParameter(format!("subset size {subset_size} outside 1..={m}")));
    }
    let cols: Vec<Vec<f64>> = (0..m).map(|j| panel.forecasts.column(j).iter().copied().collect()).collect();
    let maes: Vec<f64> = cols.iter().map(|c| mae(y.as_slice(), c)).collect::<Result<_>>()?;
    let mut corr = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in (i + 1)..m {
            corr[i][j] = pearson(&cols[i], &cols[j]);
        }
    }
    let mut kept: Vec<usize> = (0..m).collect();
    let mut steps = Vec::new();
    while kept.len() > subset_size {
        let mut best: Option<(usize, usize, f64)> = None;
        for (a, &i) in kept.iter().enumerate() {
            for &j in &kept[a + 1..] {
                let c = corr[i][j];
                // strict comparison keeps the lowest-index pair on ties
                if best.is_none_or(|(_, _, bc)| c > bc) {
                    best = Some((i, j, c));
                }
            }
        }
        let (i, j, c) = best.expect("at least two columns remain");
        let dropped = if maes[i] > maes[j] { i } else { j };
        steps.push(PruneStep { pair: (i, j), correlation: c, mae: (maes[i], maes[j]), dropped });
        kept.retain(|&k| k != dropped);
    }
    let mut weights = vec![0.0; m];
    for &k in &kept {
        weights[k] = 1.0 / kept.len() as f64;
    }
    Ok(SubsetFit { weights: EnsembleWeights { weights, subset_size: Some(subset_size) }, kept, steps })
}

pub fn fit_subset_average(panel: &ForecastPanel, subset_size: usize) -> Result<EnsembleWeights> {
    Ok(fit_subset_average_traced(panel, subset_size)?.weights)
}

/// Subset size chosen on a chronological split of the panel: fit on the
/// leading rows, score MAE on the trailing rows, over sizes `2..=M-1`.
/// Ties go to the smaller size. Panels with fewer than three models keep
/// every column.
pub fn tune_subset_size(panel: &ForecastPanel, fit_rows: usize) -> Result<usize> {
    let m = panel.n_models();
    if m < 3 {
        return Ok(m);
    }
    let n = panel.n_rows();
    if fit_rows == 0 || fit_rows >= n {
        return Err(Error::InvalidParameter(format!("nested split at {fit_rows} of {n} rows")));
    }
    let head = panel.select_rows(&(0..fit_rows).collect::<Vec<_>>());
    let tail = panel.select_rows(&(fit_rows..n).collect::<Vec<_>>());
    let mut best = (f64::INFINITY, 2);
    for size in 2..m {
        let w = fit_subset_average(&head, size)?;
        let score = mae(tail.target()?.as_slice(), w.apply(&tail.forecasts)?.as_slice())?;
        if score < best.0 {
            best = (score, size);
        }
    }
    Ok(best.1)
}

/// Support vector regression with the base forecasts as features.
pub fn fit_svr_stack(panel: &ForecastPanel, spec: &ForecasterSpec) -> Result<TrainedForecaster> {
    if !matches!(spec, ForecasterSpec::Svr(_)) {
        return Err(Error::InvalidParameter("stacking requires an svr spec".into()));
    }
    let y = panel.target()?;
    TrainedForecaster::fit(spec, &panel.forecasts, y, &vec![true; panel.n_models()])
}

/// Fitted aggregator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Ensemble {
    SimpleAverage,
    WeightedAverage { weights: EnsembleWeights },
    SubsetAverage { weights: EnsembleWeights },
    SvrStack { model: TrainedForecaster },
}

impl Ensemble {
    pub fn name(&self) -> &'static str {
        match self {
            Ensemble::SimpleAverage => "simple_average",
            Ensemble::WeightedAverage { .. } => "weighted_average",
            Ensemble::SubsetAverage { .. } => "subset_average",
            Ensemble::SvrStack { .. } => "svr_stack",
        }
    }

    pub fn predict(&self, forecasts: &DMatrix<f64>) -> Result<DVector<f64>> {
        match self {
            Ensemble::SimpleAverage => Ok(simple_average(forecasts)),
            Ensemble::WeightedAverage { weights } | Ensemble::SubsetAverage { weights } => weights.apply(forecasts),
            Ensemble::SvrStack { model } => model.predict(forecasts),
        }
    }
}

pub const ENSEMBLE_NAMES: [&str; 4] = ["simple_average", "subset_average", "weighted_average", "svr_stack"];

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(cols: &[&[f64]], target: &[f64]) -> ForecastPanel {
        let n = target.len();
        let m = cols.len();
        let f = DMatrix::from_fn(n, m, |i, j| cols[j][i]);
        ForecastPanel::new(
            (0..n).map(|k| CivilDate::ymd(2016, 1, 1).add_days(k as i64)).collect(),
            (0..m).map(|j| format!("m{j}")).collect(),
            f,
            Some(DVector::from_column_slice(target)),
        )
        .unwrap()
    }

    #[test]
    fn simple_average_examples() {
        let f = DMatrix::from_row_slice(1, 2, &[2.0, 4.0]);
        assert_eq!(simple_average(&f)[0], 3.0);
        let single = DMatrix::from_column_slice(3, 1, &[1.0, 5.0, 2.0]);
        assert_eq!(simple_average(&single).as_slice(), &[1.0, 5.0, 2.0]);
    }

    #[test]
    fn projection_onto_simplex() {
        let w = project_simplex(&[0.2, 0.2, 0.2]);
        assert!(w.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(project_simplex(&[5.0, -1.0]), vec![1.0, 0.0]);
        let w = project_simplex(&[0.6, 0.6]);
        assert_eq!(w, vec![0.5, 0.5]);
    }

    #[test]
    fn single_model_weight_is_one() {
        let p = panel(&[&[1.0, 2.0, 3.0]], &[1.5, 2.0, 2.5]);
        assert_eq!(fit_weighted_average(&p).unwrap().weights, vec![1.0]);
    }

    #[test]
    fn subset_full_size_is_simple_average() {
        let p = panel(&[&[1.0, 2.0, 4.0], &[0.0, 3.0, 1.0]], &[1.0, 2.0, 3.0]);
        let w = fit_subset_average(&p, 2).unwrap();
        assert_eq!(w.apply(&p.forecasts).unwrap(), simple_average(&p.forecasts));
        assert!(fit_subset_average(&p, 3).is_err());
    }

    #[test]
    fn identical_columns_pruned_first() {
        let a = [1.0, 3.0, 2.0, 5.0];
        let p = panel(&[&a, &[4.0, 1.0, 0.0, 2.0], &a], &[1.0, 2.0, 2.0, 4.0]);
        let fit = fit_subset_average_traced(&p, 2).unwrap();
        assert_eq!(fit.steps[0].pair, (0, 2));
        // equal MAE: the higher index goes
        assert_eq!(fit.steps[0].dropped, 2);
    }

    #[test]
    fn constant_column_correlation_is_zero() {
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), 0.0);
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-15);
    }
}
