//! Feed-forward network with tanh hidden layers and a linear output unit,
//! trained by mini-batch gradient descent on the mean squared error.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for MlpSpec {
    fn default() -> Self {
        MlpSpec { hidden: vec![16], activation: Activation::Tanh, learning_rate: 1e-2, epochs: 500, batch: 32, seed: 0 }
    }
}

/// Layer sizes plus all weights and biases in one flat vector.
///
/// Layer `l` maps `sizes[l]` inputs to `sizes[l + 1]` outputs and stores a
/// row-major `out x in` weight block followed by `out` biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

impl Network {
    /// Glorot-uniform weights, zero biases.
    pub fn new(inputs: usize, hidden: &[usize], seed: u64) -> Self {
        let mut sizes = vec![inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.gen_range(-bound..bound)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Network { sizes, params }
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut offs = vec![0];
        for w in self.sizes.windows(2) {
            let last = *offs.last().unwrap();
            offs.push(last + w[0] * w[1] + w[1]);
        }
        offs
    }

    /// Activations of every layer for one input row.
    fn forward_all(&self, row: &[f64]) -> Vec<Vec<f64>> {
        let offs = self.layer_offsets();
        let n_layers = self.sizes.len() - 1;
        let mut acts = vec![row.to_vec()];
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offs[l]..offs[l] + fan_in * fan_out];
            let b = &self.params[offs[l] + fan_in * fan_out..offs[l + 1]];
            let input = &acts[l];
            let out: Vec<f64> = (0..fan_out)
                .map(|o| {
                    let z = b[o] + w[o * fan_in..(o + 1) * fan_in].iter().zip(input).map(|(a, x)| a * x).sum::<f64>();
                    if l + 1 < n_layers { z.tanh() } else { z }
                })
                .collect();
            acts.push(out);
        }
        acts
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.forward_all(row).last().unwrap()[0]
    }

    /// Loss `1/(2m) * sum (f(x_i) - y_i)^2` over the listed rows.
    pub fn loss(&self, x: &[f64], y: &[f64], rows: &[usize]) -> f64 {
        let p = self.sizes[0];
        rows.iter()
            .map(|&i| {
                let e = self.predict(&x[i * p..(i + 1) * p]) - y[i];
                e * e
            })
            .sum::<f64>()
            / (2.0 * rows.len() as f64)
    }

    /// Loss and its gradient with respect to `params`, by backpropagation.
    pub fn loss_and_gradient(&self, x: &[f64], y: &[f64], rows: &[usize]) -> (f64, Vec<f64>) {
        let p = self.sizes[0];
        let offs = self.layer_offsets();
        let n_layers = self.sizes.len() - 1;
        let m = rows.len() as f64;
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for &i in rows {
            let acts = self.forward_all(&x[i * p..(i + 1) * p]);
            let err = acts[n_layers][0] - y[i];
            loss += err * err;
            // delta = dL/dz at the current layer
            let mut delta = vec![err / m];
            for l in (0..n_layers).rev() {
                let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
                let input = &acts[l];
                let wo = offs[l];
                let bo = offs[l] + fan_in * fan_out;
                for o in 0..fan_out {
                    grad[bo + o] += delta[o];
                    for k in 0..fan_in {
                        grad[wo + o * fan_in + k] += delta[o] * input[k];
                    }
                }
                if l > 0 {
                    let w = &self.params[wo..bo];
                    delta = (0..fan_in)
                        .map(|k| {
                            let back: f64 = (0..fan_out).map(|o| w[o * fan_in + k] * delta[o]).sum();
                            back * (1.0 - input[k] * input[k])
                        })
                        .collect();
                }
            }
        }
        (loss / (2.0 * m), grad)
    }
}

/// Trains a network on row-major `x` (n x p) and `y`.
pub fn train(x: &[f64], p: usize, y: &[f64], spec: &MlpSpec) -> Result<Network> {
    let n = y.len();
    if spec.batch == 0 || spec.epochs == 0 || !(spec.learning_rate > 0.0) || spec.hidden.iter().any(|h| *h == 0) {
        return Err(Error::InvalidParameter(format!("invalid mlp spec {spec:?}")));
    }
    let mut net = Network::new(p, &spec.hidden, spec.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..spec.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(spec.batch) {
            let (loss, grad) = net.loss_and_gradient(x, y, batch);
            epoch_loss += loss * batch.len() as f64;
            for (w, g) in net.params.iter_mut().zip(&grad) {
                *w -= spec.learning_rate * g;
            }
        }
        if !epoch_loss.is_finite() || net.params.iter().any(|w| !w.is_finite()) {
            return Err(Error::Diverged(format!("mlp loss became non-finite in epoch {epoch}")));
        }
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_matches_finite_differences() {
        let x: Vec<f64> = (0..12).map(|i| ((i * 7) % 5) as f64 / 3.0 - 0.5).collect();
        let y = [0.3, -0.2, 0.8, 0.1];
        let rows = [0, 1, 2, 3];
        let net = Network::new(3, &[4, 3], 11);
        let (_, g) = net.loss_and_gradient(&x, &y, &rows);
        let h = 1e-5;
        for k in 0..net.n_params() {
            let mut plus = net.clone();
            plus.params[k] += h;
            let mut minus = net.clone();
            minus.params[k] -= h;
            let fd = (plus.loss(&x, &y, &rows) - minus.loss(&x, &y, &rows)) / (2.0 * h);
            let rel = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-6);
            assert!(rel < 1e-4, "param {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn learns_a_line() {
        let x: Vec<f64> = (0..64).map(|i| i as f64 / 32.0 - 1.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v).collect();
        let spec = MlpSpec { hidden: vec![8], epochs: 300, ..MlpSpec::default() };
        let net = train(&x, 1, &y, &spec).unwrap();
        let rows: Vec<usize> = (0..64).collect();
        assert!(net.loss(&x, &y, &rows) < 1e-3);
    }

    #[test]
    fn divergence_reported() {
        let x: Vec<f64> = (0..16).map(|i| i as f64 * 100.0).collect();
        let y: Vec<f64> = x.iter().map(|v| v * 1e3).collect();
        let spec = MlpSpec { learning_rate: 100.0, epochs: 1000, ..MlpSpec::default() };
        assert!(matches!(train(&x, 1, &y, &spec), Err(Error::Diverged(_))));
    }
}
