//! Exact Gaussian-process regression with a squared-exponential kernel.

use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const JITTER: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpSpec {
    pub gamma: f64,
    pub signal_var: f64,
    pub noise_var: f64,
    /// Fit on at most this many of the most recent rows.
    #[serde(default)]
    pub max_rows: Option<usize>,
}

impl GpSpec {
    pub fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        self.signal_var * (-self.gamma * d2).exp()
    }
}

/// Posterior of a zero-mean GP on the centered target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianProcess {
    pub spec: GpSpec,
    pub n_features: usize,
    pub rows: Vec<f64>,
    pub y_mean: f64,
    /// `(K + noise I)^-1 (y - mean)`
    pub weights: Vec<f64>,
    /// Jitter that was added to the diagonal to make the factorization succeed.
    pub jitter: f64,
    #[serde(skip)]
    factor: OnceLock<Cholesky<f64, Dyn>>,
}

impl PartialEq for GaussianProcess {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
            && self.n_features == other.n_features
            && self.rows == other.rows
            && self.y_mean == other.y_mean
            && self.weights == other.weights
            && self.jitter == other.jitter
    }
}

fn covariance(spec: &GpSpec, rows: &[f64], p: usize, diag: f64) -> DMatrix<f64> {
    let n = rows.len() / p.max(1);
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = spec.kernel(&rows[i * p..(i + 1) * p], &rows[j * p..(j + 1) * p]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += diag;
    }
    k
}

impl GaussianProcess {
    pub fn fit(spec: GpSpec, rows: Vec<f64>, p: usize, y: &[f64]) -> Result<Self> {
        if !(spec.noise_var > 0.0) || !(spec.signal_var > 0.0) || !(spec.gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gp hyperparameters must be positive: {spec:?}")));
        }
        let n = y.len();
        let y_mean = y.iter().sum::<f64>() / n.max(1) as f64;
        let centered = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let k = covariance(&spec, &rows, p, spec.noise_var);
        let (chol, jitter) = match k.clone().cholesky() {
            Some(c) => (c, 0.0),
            None => {
                let mut kj = k;
                for i in 0..n {
                    kj[(i, i)] += JITTER;
                }
                let c = kj
                    .cholesky()
                    .ok_or_else(|| Error::Factorization(format!("gp covariance not positive definite even with jitter {JITTER:e}")))?;
                (c, JITTER)
            }
        };
        let weights = chol.solve(&centered).iter().copied().collect();
        let gp = GaussianProcess {
            spec,
            n_features: p,
            rows,
            y_mean,
            weights,
            jitter,
            factor: OnceLock::new(),
        };
        let _ = gp.factor.set(chol);
        Ok(gp)
    }

    fn cross(&self, query: &[f64]) -> DVector<f64> {
        let p = self.n_features;
        let n = self.weights.len();
        DVector::from_iterator(n, (0..n).map(|i| self.spec.kernel(&self.rows[i * p..(i + 1) * p], query)))
    }

    pub fn mean(&self, query: &[f64]) -> f64 {
        let ks = self.cross(query);
        self.y_mean + ks.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Posterior variance of the latent function at `query`.
    pub fn variance(&self, query: &[f64]) -> f64 {
        let chol = self.factor.get_or_init(|| {
            covariance(&self.spec, &self.rows, self.n_features, self.spec.noise_var + self.jitter)
                .cholesky()
                .expect("factorization succeeded at fit time")
        });
        let ks = self.cross(query);
        let v = chol.l().solve_lower_triangular(&ks).expect("triangular factor is invertible");
        self.spec.signal_var - v.norm_squared()
    }
}
