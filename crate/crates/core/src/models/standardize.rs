use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Column-wise z-scoring fitted on the training rows.
///
/// Columns with `scale = false` (indicators) pass through unchanged. The
/// spread is the population standard deviation; constant columns get a unit
/// spread so they map to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub scaled: Vec<bool>,
}

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>, scaled: &[bool]) -> Self {
        let n = x.nrows().max(1) as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut std = Vec::with_capacity(x.ncols());
        for (j, col) in x.column_iter().enumerate() {
            if scaled[j] {
                let m = col.sum() / n;
                let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
                let s = var.sqrt();
                mean.push(m);
                std.push(if s > 0.0 { s } else { 1.0 });
            } else {
                mean.push(0.0);
                std.push(1.0);
            }
        }
        Standardizer { mean, std, scaled: scaled.to_vec() }
    }

    pub fn n_cols(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            if self.scaled[j] {
                let (m, s) = (self.mean[j], self.std[j]);
                col.iter_mut().for_each(|v| *v = (*v - m) / s);
            }
        }
        out
    }

    /// Transformed matrix as row-major storage.
    pub fn transform_rows(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let t = self.transform(x);
        let (n, p) = t.shape();
        let mut rows = Vec::with_capacity(n * p);
        for i in 0..n {
            rows.extend(t.row(i).iter());
        }
        rows
    }
}

/// Mean and population standard deviation of a target vector; a zero
/// spread is replaced by one.
pub fn target_scale(y: &[f64]) -> (f64, f64) {
    let n = y.len().max(1) as f64;
    let m = y.iter().sum::<f64>() / n;
    let s = (y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
    (m, if s > 0.0 { s } else { 1.0 })
}
