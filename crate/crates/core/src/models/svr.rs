//! Epsilon-insensitive support vector regression solved in the dual by
//! sequential minimal optimization with second-order working-set selection.
//!
//! The dual is written over `2n` variables `a = [alpha; alpha*]`:
//!
//! ```text
//! min  1/2 a'Qa + p'a   s.t.  s'a = 0,  0 <= a <= C
//! Q_tu = s_t s_u K(i_t, i_u),  p = [eps - y; eps + y],  s = [1; -1]
//! ```
//!
//! and the regression function is `f(x) = sum_i (alpha_i - alpha*_i) K(x_i, x) - rho`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }

    /// Dense `n x n` Gram matrix of row-major `rows` with `p` columns.
    pub fn gram(&self, rows: &[f64], p: usize) -> Vec<f64> {
        let n = if p == 0 { 0 } else { rows.len() / p };
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            let ri = &rows[i * p..(i + 1) * p];
            for j in 0..=i {
                let v = self.eval(ri, &rows[j * p..(j + 1) * p]);
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        k
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoOptions {
    /// Stop when the maximal KKT violation `m(a) - M(a)` drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Record the dual objective after every iteration.
    pub track_objective: bool,
}

impl Default for SmoOptions {
    fn default() -> Self {
        SmoOptions { tol: 1e-3, max_iter: 100_000, track_objective: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub kkt_violation: f64,
    pub converged: bool,
    /// Dual objective values, starting at the zero initial point.
    pub objective_trace: Vec<f64>,
}

impl SmoSolution {
    /// `alpha - alpha*` per training point.
    pub fn coefficients(&self) -> Vec<f64> {
        self.alpha.iter().zip(&self.alpha_star).map(|(a, b)| a - b).collect()
    }
}

/// Solves the dual for a precomputed row-major kernel matrix.
pub fn solve(kernel: &[f64], y: &[f64], c: f64, epsilon: f64, opts: &SmoOptions) -> Result<SmoSolution> {
    let n = y.len();
    if kernel.len() != n * n {
        return Err(Error::LengthMismatch { expected: n * n, found: kernel.len() });
    }
    if !(c > 0.0) || !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!("svr requires c > 0 and epsilon >= 0, got c={c}, epsilon={epsilon}")));
    }
    let l = 2 * n;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let idx = |t: usize| if t < n { t } else { t - n };
    let k = |i: usize, j: usize| kernel[i * n + j];
    let p: Vec<f64> = (0..l).map(|t| if t < n { epsilon - y[t] } else { epsilon + y[t - n] }).collect();
    let qd: Vec<f64> = (0..l).map(|t| k(idx(t), idx(t))).collect();
    let mut a = vec![0.0; l];
    let mut grad = p.clone();
    let objective = |a: &[f64], g: &[f64]| 0.5 * a.iter().zip(g.iter().zip(&p)).map(|(ai, (gi, pi))| ai * (gi + pi)).sum::<f64>();
    let mut trace = Vec::new();
    if opts.track_objective {
        trace.push(0.0);
    }
    let is_upper = |v: f64| v >= c;
    let is_lower = |v: f64| v <= 0.0;

    let mut iterations = 0;
    let mut violation = f64::INFINITY;
    let mut converged = false;
    while iterations < opts.max_iter {
        // first index: maximal violating candidate in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut gmax_idx = usize::MAX;
        for t in 0..l {
            let cand = if sign(t) > 0.0 {
                if is_upper(a[t]) { continue } else { -grad[t] }
            } else if is_lower(a[t]) {
                continue;
            } else {
                grad[t]
            };
            if cand >= gmax {
                gmax = cand;
                gmax_idx = t;
            }
        }
        let i = gmax_idx;
        let mut gmax2 = f64::NEG_INFINITY;
        let mut gmin_idx = usize::MAX;
        let mut obj_diff_min = f64::INFINITY;
        for t in 0..l {
            let (diff, cand2, quad) = if sign(t) > 0.0 {
                if is_lower(a[t]) {
                    continue;
                }
                let quad = if i != usize::MAX { qd[i] + qd[t] - 2.0 * k(idx(i), idx(t)) } else { 0.0 };
                (gmax + grad[t], grad[t], quad)
            } else {
                if is_upper(a[t]) {
                    continue;
                }
                let quad = if i != usize::MAX { qd[i] + qd[t] - 2.0 * k(idx(i), idx(t)) } else { 0.0 };
                (gmax - grad[t], -grad[t], quad)
            };
            if cand2 >= gmax2 {
                gmax2 = cand2;
            }
            if diff > 0.0 {
                let quad = if quad > 0.0 { quad } else { TAU };
                let obj_diff = -(diff * diff) / quad;
                if obj_diff <= obj_diff_min {
                    gmin_idx = t;
                    obj_diff_min = obj_diff;
                }
            }
        }
        violation = gmax + gmax2;
        if i == usize::MAX || gmin_idx == usize::MAX || violation < opts.tol {
            if !violation.is_finite() {
                violation = 0.0;
            }
            converged = true;
            break;
        }
        let j = gmin_idx;
        iterations += 1;

        let (si, sj) = (sign(i), sign(j));
        let kij = k(idx(i), idx(j));
        let qij = si * sj * kij;
        let (old_ai, old_aj) = (a[i], a[j]);
        if si != sj {
            let quad = (qd[i] + qd[j] + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if diff > 0.0 {
                if a[j] < 0.0 {
                    a[j] = 0.0;
                    a[i] = diff;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = -diff;
            }
            if diff > 0.0 {
                if a[i] > c {
                    a[i] = c;
                    a[j] = c - diff;
                }
            } else if a[j] > c {
                a[j] = c;
                a[i] = c + diff;
            }
        } else {
            let quad = (qd[i] + qd[j] - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if sum > c {
                if a[i] > c {
                    a[i] = c;
                    a[j] = sum - c;
                }
            } else if a[j] < 0.0 {
                a[j] = 0.0;
                a[i] = sum;
            }
            if sum > c {
                if a[j] > c {
                    a[j] = c;
                    a[i] = sum - c;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = sum;
            }
        }
        let (dai, daj) = (a[i] - old_ai, a[j] - old_aj);
        if dai != 0.0 || daj != 0.0 {
            let (ii, jj) = (idx(i), idx(j));
            let row_i = &kernel[ii * n..(ii + 1) * n];
            let row_j = &kernel[jj * n..(jj + 1) * n];
            let (ci, cj) = (si * dai, sj * daj);
            for t in 0..n {
                let v = row_i[t] * ci + row_j[t] * cj;
                grad[t] += v;
                grad[t + n] -= v;
            }
        }
        if opts.track_objective {
            trace.push(objective(&a, &grad));
        }
    }

    // bias from free variables, else midpoint of the feasible interval
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut sum_free = 0.0;
    let mut n_free = 0usize;
    for t in 0..l {
        let yg = sign(t) * grad[t];
        if is_upper(a[t]) {
            if sign(t) < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else if is_lower(a[t]) {
            if sign(t) > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else if ub.is_finite() && lb.is_finite() {
        0.5 * (ub + lb)
    } else if ub.is_finite() {
        ub
    } else if lb.is_finite() {
        lb
    } else {
        0.0
    };

    let solution = SmoSolution {
        alpha: a[..n].to_vec(),
        alpha_star: a[n..].to_vec(),
        rho,
        iterations,
        kkt_violation: violation,
        converged,
        objective_trace: trace,
    };
    if !solution.converged {
        return Err(Error::NotConverged { solver: "smo", iterations, residual: violation });
    }
    Ok(solution)
}

/// Fitted kernel expansion over the support vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub kernel: Kernel,
    pub n_features: usize,
    /// Row-major support vectors.
    pub support: Vec<f64>,
    pub coef: Vec<f64>,
    pub rho: f64,
}

impl SvrModel {
    pub fn from_solution(kernel: Kernel, rows: &[f64], p: usize, sol: &SmoSolution) -> Self {
        let mut support = Vec::new();
        let mut coef = Vec::new();
        for (i, c) in sol.coefficients().into_iter().enumerate() {
            if c != 0.0 {
                support.extend_from_slice(&rows[i * p..(i + 1) * p]);
                coef.push(c);
            }
        }
        SvrModel { kernel, n_features: p, support, coef, rho: sol.rho }
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        let p = self.n_features;
        self.coef
            .iter()
            .enumerate()
            .map(|(i, c)| c * self.kernel.eval(&self.support[i * p..(i + 1) * p], row))
            .sum::<f64>()
            - self.rho
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> SmoOptions {
        SmoOptions { tol: 1e-10, max_iter: 100_000, track_objective: true }
    }

    #[test]
    fn wide_tube_gives_zero_duals() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 1.5, 0.7, 1.2];
        let k = Kernel::Rbf { gamma: 0.5 }.gram(&x, 1);
        let sol = solve(&k, &y, 10.0, 0.9, &opts()).unwrap();
        assert!(sol.alpha.iter().chain(&sol.alpha_star).all(|a| *a == 0.0));
        // flat function inside the tube
        let model = SvrModel::from_solution(Kernel::Rbf { gamma: 0.5 }, &x, 1, &sol);
        for (xi, yi) in x.iter().zip(&y) {
            assert!((model.decision(&[*xi]) - yi).abs() <= 0.9 + 1e-12);
        }
    }

    #[test]
    fn linear_target_inside_tube() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 / 10.0 - 1.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.8 * v + 0.3).collect();
        let k = Kernel::Linear.gram(&x, 1);
        let eps = 0.01;
        let sol = solve(&k, &y, 100.0, eps, &opts()).unwrap();
        let model = SvrModel::from_solution(Kernel::Linear, &x, 1, &sol);
        for (xi, yi) in x.iter().zip(&y) {
            assert!((model.decision(&[*xi]) - yi).abs() <= eps + 1e-6);
        }
        for w in sol.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(sol.alpha.iter().chain(&sol.alpha_star).all(|a| (-1e-9..=100.0 + 1e-9).contains(a)));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let y: Vec<f64> = (0..30).map(|i| (i as f64 * 0.7).cos()).collect();
        let k = Kernel::Rbf { gamma: 1.0 }.gram(&x, 1);
        let err = solve(&k, &y, 10.0, 0.01, &SmoOptions { tol: 1e-12, max_iter: 2, track_objective: false }).unwrap_err();
        assert!(matches!(err, Error::NotConverged { iterations: 2, .. }));
    }
}
