//! Penalized least squares.
//!
//! All three estimators minimize
//!
//! ```text
//! ||y - X b||^2 + lambda * (alpha * ||b||_2^2 + (1 - alpha) * ||b||_1)
//! ```
//!
//! on centered data, with an unpenalized intercept recovered afterwards.
//! Note the weighting: `alpha = 1` is ridge and `alpha = 0` is the lasso,
//! the reverse of the glmnet convention.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearCoefficients {
    pub intercept: f64,
    pub beta: Vec<f64>,
}

impl LinearCoefficients {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.beta).map(|(x, b)| x * b).sum::<f64>()
    }
}

/// Centered copy of `x` and `y` plus the means that were removed.
pub struct Centered {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub x_mean: Vec<f64>,
    pub y_mean: f64,
}

pub fn center(x: &DMatrix<f64>, y: &DVector<f64>) -> Centered {
    let n = x.nrows().max(1) as f64;
    let x_mean: Vec<f64> = x.column_iter().map(|c| c.sum() / n).collect();
    let y_mean = y.sum() / n;
    let mut xc = x.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-x_mean[j]);
    }
    let yc = y.add_scalar(-y_mean);
    Centered { x: xc, y: yc, x_mean, y_mean }
}

fn intercept_for(c: &Centered, beta: &[f64]) -> f64 {
    c.y_mean - c.x_mean.iter().zip(beta).map(|(m, b)| m * b).sum::<f64>()
}

/// Solves `(X'X + lambda I) b = X'y` by Cholesky factorization.
pub fn ridge_solve(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<Vec<f64>> {
    let p = x.ncols();
    let mut gram = x.tr_mul(x);
    for j in 0..p {
        gram[(j, j)] += lambda;
    }
    let rhs = x.tr_mul(y);
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Factorization("ridge normal equations are not positive definite".into()))?;
    Ok(chol.solve(&rhs).iter().copied().collect())
}

pub fn fit_ridge(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<LinearCoefficients> {
    let c = center(x, y);
    let beta = ridge_solve(&c.x, &c.y, lambda)?;
    Ok(LinearCoefficients { intercept: intercept_for(&c, &beta), beta })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdOptions {
    /// Stop when the largest coordinate change in a sweep is below this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for CdOptions {
    fn default() -> Self {
        CdOptions { tol: 1e-8, max_sweeps: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdSolution {
    pub beta: Vec<f64>,
    pub sweeps: usize,
    pub kkt_residual: f64,
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Largest violation of the optimality conditions of the objective above,
/// given the Gram matrix `G = X'X`, `c = X'y`.
pub fn kkt_residual(gram: &DMatrix<f64>, xty: &DVector<f64>, beta: &[f64], lambda: f64, alpha: f64) -> f64 {
    let b = DVector::from_column_slice(beta);
    let q = gram * &b;
    let l1 = lambda * (1.0 - alpha);
    let mut worst: f64 = 0.0;
    for j in 0..beta.len() {
        let g = 2.0 * (q[j] - xty[j]) + 2.0 * lambda * alpha * beta[j];
        let v = if beta[j] != 0.0 {
            (g + l1 * beta[j].signum()).abs()
        } else {
            (g.abs() - l1).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Cyclic coordinate descent on centered data using covariance updates.
pub fn coordinate_descent(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    alpha: f64,
    opts: &CdOptions,
) -> Result<CdSolution> {
    let p = x.ncols();
    let gram = x.tr_mul(x);
    let xty = x.tr_mul(y);
    let l1_half = 0.5 * lambda * (1.0 - alpha);
    let l2 = lambda * alpha;
    let mut beta = vec![0.0; p];
    // q = G beta
    let mut q = vec![0.0; p];
    for sweep in 1..=opts.max_sweeps {
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let gjj = gram[(j, j)];
            let denom = gjj + l2;
            let old = beta[j];
            let new = if denom > 0.0 {
                let rho = xty[j] - q[j] + gjj * old;
                soft_threshold(rho, l1_half) / denom
            } else {
                0.0
            };
            let delta = new - old;
            if delta != 0.0 {
                beta[j] = new;
                for (k, qk) in q.iter_mut().enumerate() {
                    *qk += gram[(k, j)] * delta;
                }
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < opts.tol {
            let kkt = kkt_residual(&gram, &xty, &beta, lambda, alpha);
            return Ok(CdSolution { beta, sweeps: sweep, kkt_residual: kkt });
        }
    }
    Err(Error::NotConverged {
        solver: "coordinate descent",
        iterations: opts.max_sweeps,
        residual: kkt_residual(&gram, &xty, &beta, lambda, alpha),
    })
}

pub fn fit_elastic_net(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    alpha: f64,
    opts: &CdOptions,
) -> Result<(LinearCoefficients, CdSolution)> {
    let c = center(x, y);
    let sol = coordinate_descent(&c.x, &c.y, lambda, alpha, opts)?;
    let coef = LinearCoefficients { intercept: intercept_for(&c, &sol.beta), beta: sol.beta.clone() };
    Ok((coef, sol))
}

/// Objective value on already-centered data.
pub fn objective(x: &DMatrix<f64>, y: &DVector<f64>, beta: &[f64], lambda: f64, alpha: f64) -> f64 {
    let b = DVector::from_column_slice(beta);
    let r = y - x * b;
    let l2: f64 = beta.iter().map(|v| v * v).sum();
    let l1: f64 = beta.iter().map(|v| v.abs()).sum();
    r.norm_squared() + lambda * (alpha * l2 + (1.0 - alpha) * l1)
}
