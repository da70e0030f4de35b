//! Base forecasters behind a common fit/predict contract.
//!
//! Every model standardizes the continuous input columns with statistics
//! from its own training rows and keeps them in the fitted state, so the
//! raw feature matrix is what `predict` consumes.

pub mod forest;
pub mod gp;
pub mod grid;
pub mod knn;
pub mod linear;
pub mod mlp;
pub mod standardize;
pub mod svr;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
pub use forest::ForestSpec;
pub use gp::GpSpec;
pub use linear::LinearCoefficients;
pub use mlp::MlpSpec;
pub use standardize::Standardizer;
pub use svr::Kernel;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Model families, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ridge,
    Lasso,
    ElasticNet,
    Svr,
    Gp,
    Knn,
    RandomForest,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 8] = [
        ModelKind::Ridge,
        ModelKind::Lasso,
        ModelKind::ElasticNet,
        ModelKind::Svr,
        ModelKind::Gp,
        ModelKind::Knn,
        ModelKind::RandomForest,
        ModelKind::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ridge => "ridge",
            ModelKind::Lasso => "lasso",
            ModelKind::ElasticNet => "elastic_net",
            ModelKind::Svr => "svr",
            ModelKind::Gp => "gp",
            ModelKind::Knn => "knn",
            ModelKind::RandomForest => "random_forest",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownModel(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrSpec {
    pub c: f64,
    /// Tube half-width in target units.
    pub epsilon: f64,
    pub kernel: Kernel,
    #[serde(default = "default_svr_tol")]
    pub tol: f64,
    #[serde(default = "default_svr_max_iter")]
    pub max_iter: usize,
    /// Fit on at most this many of the most recent rows.
    #[serde(default)]
    pub max_rows: Option<usize>,
}

fn default_svr_tol() -> f64 {
    1e-3
}

fn default_svr_max_iter() -> usize {
    100_000
}

impl SvrSpec {
    pub fn new(c: f64, epsilon: f64, kernel: Kernel) -> Self {
        SvrSpec { c, epsilon, kernel, tol: default_svr_tol(), max_iter: default_svr_max_iter(), max_rows: None }
    }
}

/// Hyperparameters of one base forecaster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ForecasterSpec {
    Ridge { lambda: f64 },
    Lasso { lambda: f64 },
    ElasticNet { lambda: f64, alpha: f64 },
    Svr(SvrSpec),
    RandomForest(ForestSpec),
    Knn { k: usize },
    Gp(GpSpec),
    Mlp(MlpSpec),
}

impl ForecasterSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ForecasterSpec::Ridge { .. } => ModelKind::Ridge,
            ForecasterSpec::Lasso { .. } => ModelKind::Lasso,
            ForecasterSpec::ElasticNet { .. } => ModelKind::ElasticNet,
            ForecasterSpec::Svr(_) => ModelKind::Svr,
            ForecasterSpec::RandomForest(_) => ModelKind::RandomForest,
            ForecasterSpec::Knn { .. } => ModelKind::Knn,
            ForecasterSpec::Gp(_) => ModelKind::Gp,
            ForecasterSpec::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            ForecasterSpec::Ridge { lambda } | ForecasterSpec::Lasso { lambda } if !(*lambda > 0.0) => {
                bad(format!("lambda must be positive, got {lambda}"))
            }
            ForecasterSpec::ElasticNet { lambda, alpha } if !(*lambda > 0.0) || !(0.0..=1.0).contains(alpha) => {
                bad(format!("elastic net needs lambda > 0 and alpha in [0, 1], got {lambda}, {alpha}"))
            }
            ForecasterSpec::Svr(s) if !(s.c > 0.0) || !(s.epsilon >= 0.0) || !(s.tol > 0.0) => {
                bad(format!("svr needs c > 0, epsilon >= 0, tol > 0: {s:?}"))
            }
            ForecasterSpec::Svr(SvrSpec { kernel: Kernel::Rbf { gamma }, .. }) if !(*gamma > 0.0) => {
                bad(format!("rbf gamma must be positive, got {gamma}"))
            }
            ForecasterSpec::RandomForest(f) if f.n_trees == 0 || f.mtry == 0 || f.mtry > n_features || f.min_leaf == 0 => {
                bad(format!("random forest needs n_trees >= 1, min_leaf >= 1, 1 <= mtry <= {n_features}: {f:?}"))
            }
            ForecasterSpec::Knn { k } if *k == 0 => bad("knn needs k >= 1".into()),
            ForecasterSpec::Gp(g) if !(g.noise_var > 0.0) || !(g.signal_var > 0.0) || !(g.gamma > 0.0) => {
                bad(format!("gp hyperparameters must be positive: {g:?}"))
            }
            ForecasterSpec::Mlp(m) if m.batch == 0 || m.epochs == 0 || !(m.learning_rate > 0.0) || m.hidden.is_empty() => {
                bad(format!("invalid mlp spec {m:?}"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum FittedState {
    Linear(LinearCoefficients),
    Svr { model: svr::SvrModel, y_mean: f64, y_scale: f64 },
    Forest(forest::Forest),
    Knn(knn::Knn),
    Gp(gp::GaussianProcess),
    Mlp { network: mlp::Network, y_mean: f64, y_scale: f64 },
}

/// A fitted base forecaster. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedForecaster {
    pub format_version: u32,
    pub spec: ForecasterSpec,
    pub standardizer: Standardizer,
    pub state: FittedState,
}

fn row_major(x: &DMatrix<f64>) -> Vec<f64> {
    let (n, p) = x.shape();
    let mut out = Vec::with_capacity(n * p);
    for i in 0..n {
        out.extend(x.row(i).iter());
    }
    out
}

/// Keeps the last `max_rows` rows.
fn most_recent(x: &DMatrix<f64>, y: &DVector<f64>, max_rows: Option<usize>) -> (DMatrix<f64>, DVector<f64>) {
    match max_rows {
        Some(m) if m < x.nrows() => {
            let start = x.nrows() - m;
            (x.rows(start, m).into_owned(), y.rows(start, m).into_owned())
        }
        _ => (x.clone(), y.clone()),
    }
}

impl TrainedForecaster {
    /// Fits `spec` on `x`/`y`; `scaled[j]` marks the columns to standardize.
    pub fn fit(spec: &ForecasterSpec, x: &DMatrix<f64>, y: &DVector<f64>, scaled: &[bool]) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 {
            return Err(Error::InvalidParameter("no training rows".into()));
        }
        if y.len() != n {
            return Err(Error::LengthMismatch { expected: n, found: y.len() });
        }
        if scaled.len() != p {
            return Err(Error::ColumnMismatch { expected: p, found: scaled.len() });
        }
        ensure_finite(x.as_slice(), "training features")?;
        ensure_finite(y.as_slice(), "training target")?;
        spec.validate(p)?;

        let window = match spec {
            ForecasterSpec::Svr(s) => s.max_rows,
            ForecasterSpec::Gp(g) => g.max_rows,
            _ => None,
        };
        let (x, y) = most_recent(x, y, window);
        let standardizer = Standardizer::fit(&x, scaled);
        let xs = standardizer.transform(&x);

        let state = match spec {
            ForecasterSpec::Ridge { lambda } => FittedState::Linear(linear::fit_ridge(&xs, &y, *lambda)?),
            ForecasterSpec::Lasso { lambda } => {
                FittedState::Linear(linear::fit_elastic_net(&xs, &y, *lambda, 0.0, &linear::CdOptions::default())?.0)
            }
            ForecasterSpec::ElasticNet { lambda, alpha } => {
                FittedState::Linear(linear::fit_elastic_net(&xs, &y, *lambda, *alpha, &linear::CdOptions::default())?.0)
            }
            ForecasterSpec::Svr(s) => {
                let rows = row_major(&xs);
                let (y_mean, y_scale) = standardize::target_scale(y.as_slice());
                let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_scale).collect();
                let gram = s.kernel.gram(&rows, p);
                let opts = svr::SmoOptions { tol: s.tol, max_iter: s.max_iter, track_objective: false };
                let sol = svr::solve(&gram, &ys, s.c, s.epsilon / y_scale, &opts)?;
                FittedState::Svr { model: svr::SvrModel::from_solution(s.kernel, &rows, p, &sol), y_mean, y_scale }
            }
            ForecasterSpec::RandomForest(f) => FittedState::Forest(forest::Forest::fit(&row_major(&xs), p, y.as_slice(), f)),
            ForecasterSpec::Knn { k } => FittedState::Knn(knn::Knn {
                k: *k,
                n_features: p,
                rows: row_major(&xs),
                targets: y.as_slice().to_vec(),
            }),
            ForecasterSpec::Gp(g) => FittedState::Gp(gp::GaussianProcess::fit(*g, row_major(&xs), p, y.as_slice())?),
            ForecasterSpec::Mlp(m) => {
                let (y_mean, y_scale) = standardize::target_scale(y.as_slice());
                let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_scale).collect();
                FittedState::Mlp { network: mlp::train(&row_major(&xs), p, &ys, m)?, y_mean, y_scale }
            }
        };
        Ok(TrainedForecaster { format_version: MODEL_FORMAT_VERSION, spec: spec.clone(), standardizer, state })
    }

    pub fn n_features(&self) -> usize {
        self.standardizer.n_cols()
    }

    pub fn linear_coefficients(&self) -> Option<&LinearCoefficients> {
        match &self.state {
            FittedState::Linear(c) => Some(c),
            _ => None,
        }
    }

    fn predict_standardized_row(&self, row: &[f64]) -> f64 {
        match &self.state {
            FittedState::Linear(c) => c.predict_row(row),
            FittedState::Svr { model, y_mean, y_scale } => y_mean + y_scale * model.decision(row),
            FittedState::Forest(f) => f.predict(row),
            FittedState::Knn(k) => k.predict(row),
            FittedState::Gp(g) => g.mean(row),
            FittedState::Mlp { network, y_mean, y_scale } => y_mean + y_scale * network.predict(row),
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::ColumnMismatch { expected: self.n_features(), found: x.ncols() });
        }
        ensure_finite(x.as_slice(), "prediction features")?;
        let rows = self.standardizer.transform_rows(x);
        let p = self.n_features();
        let out = DVector::from_iterator(x.nrows(), (0..x.nrows()).map(|i| self.predict_standardized_row(&rows[i * p..(i + 1) * p])));
        ensure_finite(out.as_slice(), "forecast")?;
        Ok(out)
    }

    /// GP posterior variance in target units; `None` for other models.
    pub fn predict_variance(&self, x: &DMatrix<f64>) -> Result<Option<DVector<f64>>> {
        let FittedState::Gp(gp) = &self.state else { return Ok(None) };
        if x.ncols() != self.n_features() {
            return Err(Error::ColumnMismatch { expected: self.n_features(), found: x.ncols() });
        }
        let rows = self.standardizer.transform_rows(x);
        let p = self.n_features();
        Ok(Some(DVector::from_iterator(x.nrows(), (0..x.nrows()).map(|i| gp.variance(&rows[i * p..(i + 1) * p])))))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: TrainedForecaster = serde_json::from_str(s)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::FormatVersion(model.format_version));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> (DMatrix<f64>, DVector<f64>) {
        let n = 40;
        let x = DMatrix::from_fn(n, 3, |i, j| ((i * (j + 3) * 7 + j) % 11) as f64 / 5.0 + if j == 2 { 0.0 } else { 1.0 });
        let y = DVector::from_fn(n, |i, _| 10.0 + 2.0 * x[(i, 0)] - x[(i, 1)] + 0.5 * ((i % 4) as f64));
        (x, y)
    }

    fn specs() -> Vec<ForecasterSpec> {
        vec![
            ForecasterSpec::Ridge { lambda: 0.1 },
            ForecasterSpec::Lasso { lambda: 0.1 },
            ForecasterSpec::ElasticNet { lambda: 0.1, alpha: 0.5 },
            ForecasterSpec::Svr(SvrSpec::new(10.0, 0.1, Kernel::Rbf { gamma: 0.3 })),
            ForecasterSpec::RandomForest(ForestSpec { n_trees: 10, max_depth: Some(4), min_leaf: 1, mtry: 2, seed: 3, bootstrap: true }),
            ForecasterSpec::Knn { k: 3 },
            ForecasterSpec::Gp(GpSpec { gamma: 0.3, signal_var: 1.0, noise_var: 0.1, max_rows: None }),
            ForecasterSpec::Mlp(MlpSpec { epochs: 20, ..MlpSpec::default() }),
        ]
    }

    #[test]
    fn every_model_round_trips_and_is_deterministic() {
        let (x, y) = data();
        let mask = [true, true, false];
        for spec in specs() {
            let a = TrainedForecaster::fit(&spec, &x, &y, &mask).unwrap();
            let b = TrainedForecaster::fit(&spec, &x, &y, &mask).unwrap();
            let pa = a.predict(&x).unwrap();
            assert_eq!(pa, b.predict(&x).unwrap(), "{spec:?}");
            let restored = TrainedForecaster::from_json(&a.to_json().unwrap()).unwrap();
            assert_eq!(restored.predict(&x).unwrap(), pa, "{spec:?}");
        }
    }

    #[test]
    fn duplicated_row_gives_identical_outputs() {
        let (x, y) = data();
        let dup = DMatrix::from_fn(5, 3, |_, j| x[(7, j)]);
        for spec in specs() {
            let m = TrainedForecaster::fit(&spec, &x, &y, &[true, true, false]).unwrap();
            let out = m.predict(&dup).unwrap();
            assert!(out.iter().all(|v| *v == out[0]), "{spec:?}");
        }
    }

    #[test]
    fn column_mismatch() {
        let (x, y) = data();
        let m = TrainedForecaster::fit(&ForecasterSpec::Ridge { lambda: 1.0 }, &x, &y, &[true; 3]).unwrap();
        let bad = DMatrix::zeros(2, 4);
        assert!(matches!(m.predict(&bad), Err(Error::ColumnMismatch { expected: 3, found: 4 })));
    }

    #[test]
    fn invalid_hyperparameters_rejected() {
        let (x, y) = data();
        for spec in [
            ForecasterSpec::Ridge { lambda: 0.0 },
            ForecasterSpec::ElasticNet { lambda: 1.0, alpha: 1.5 },
            ForecasterSpec::Knn { k: 0 },
            ForecasterSpec::RandomForest(ForestSpec { n_trees: 1, max_depth: None, min_leaf: 1, mtry: 9, seed: 0, bootstrap: true }),
        ] {
            assert!(TrainedForecaster::fit(&spec, &x, &y, &[true; 3]).is_err(), "{spec:?}");
        }
        let mut y_nan = y.clone();
        y_nan[0] = f64::NAN;
        assert!(matches!(
            TrainedForecaster::fit(&ForecasterSpec::Ridge { lambda: 1.0 }, &x, &y_nan, &[true; 3]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn format_version_checked() {
        let (x, y) = data();
        let m = TrainedForecaster::fit(&ForecasterSpec::Knn { k: 2 }, &x, &y, &[true; 3]).unwrap();
        let json = m.to_json().unwrap().replacen("\"format_version\":1", "\"format_version\":99", 1);
        assert!(matches!(TrainedForecaster::from_json(&json), Err(Error::FormatVersion(99))));
    }
}
