//! Hyperparameter grids for cross-validation.
//!
//! Grids are expressed relative to the training data where the natural
//! scale depends on it (tube width relative to the target spread, kernel
//! width relative to the feature count) and resolved into concrete
//! [`ForecasterSpec`]s once the training rows are known. Resolved grids are
//! ordered from strongest to weakest regularization, which is the order
//! cross-validation ties are broken in.

use serde::{Deserialize, Serialize};

use super::{ForecasterSpec, ForestSpec, GpSpec, Kernel, MlpSpec, ModelKind, SvrSpec};

/// Per-split feature count rule for random forests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mtry {
    /// `ceil(p / 3)`
    Third,
    /// `ceil(sqrt(p))`
    Sqrt,
    All,
    Fixed(usize),
}

impl Mtry {
    pub fn resolve(self, p: usize) -> usize {
        let m = match self {
            Mtry::Third => p.div_ceil(3),
            Mtry::Sqrt => (p as f64).sqrt().ceil() as usize,
            Mtry::All => p,
            Mtry::Fixed(m) => m,
        };
        m.clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyGrid {
    pub lambda: Vec<f64>,
    #[serde(default)]
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvrGrid {
    pub c: Vec<f64>,
    /// Multiples of the training-target standard deviation.
    pub epsilon_scale: Vec<f64>,
    /// Multiples of `1 / p`; empty means a linear kernel.
    pub gamma_scale: Vec<f64>,
    #[serde(default)]
    pub max_rows: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestGrid {
    pub n_trees: usize,
    /// `null` is unlimited depth.
    pub max_depth: Vec<Option<usize>>,
    pub mtry: Vec<Mtry>,
    #[serde(default = "one")]
    pub min_leaf: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnnGrid {
    pub k: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpGrid {
    /// Multiples of `1 / p`.
    pub gamma_scale: Vec<f64>,
    pub signal_var: Vec<f64>,
    pub noise_var: Vec<f64>,
    #[serde(default)]
    pub max_rows: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpGrid {
    pub hidden: Vec<Vec<usize>>,
    pub learning_rate: Vec<f64>,
    pub epochs: usize,
    pub batch: usize,
}

/// Grids for every family; missing families use the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub ridge: PenaltyGrid,
    pub lasso: PenaltyGrid,
    pub elastic_net: PenaltyGrid,
    pub svr: SvrGrid,
    pub gp: GpGrid,
    pub knn: KnnGrid,
    pub random_forest: ForestGrid,
    pub mlp: MlpGrid,
    /// Grid for the stacking regressor; kernels follow `gamma_scale`.
    pub svr_stack: SvrGrid,
}

/// `10^-3 .. 10^3`, seven points, descending.
fn default_lambdas() -> Vec<f64> {
    vec![1e3, 1e2, 1e1, 1e0, 1e-1, 1e-2, 1e-3]
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            ridge: PenaltyGrid { lambda: default_lambdas(), alpha: vec![] },
            lasso: PenaltyGrid { lambda: default_lambdas(), alpha: vec![] },
            elastic_net: PenaltyGrid { lambda: default_lambdas(), alpha: vec![1.0, 0.75, 0.5, 0.25, 0.0] },
            svr: SvrGrid {
                c: vec![0.1, 1.0, 10.0, 100.0],
                epsilon_scale: vec![0.1, 0.05, 0.01],
                gamma_scale: vec![0.01, 0.1, 1.0],
                max_rows: Some(1460),
            },
            gp: GpGrid {
                gamma_scale: vec![0.01, 0.1, 1.0],
                signal_var: vec![1.0],
                noise_var: vec![0.1, 0.01],
                max_rows: Some(1460),
            },
            knn: KnnGrid { k: vec![20, 10, 5, 3] },
            random_forest: ForestGrid {
                n_trees: 200,
                max_depth: vec![Some(6), Some(10), None],
                mtry: vec![Mtry::Third, Mtry::Sqrt],
                min_leaf: 1,
            },
            mlp: MlpGrid { hidden: vec![vec![16]], learning_rate: vec![1e-2], epochs: 500, batch: 32 },
            svr_stack: SvrGrid {
                c: vec![0.1, 1.0, 10.0, 100.0],
                epsilon_scale: vec![0.1, 0.05, 0.01],
                gamma_scale: vec![],
                max_rows: None,
            },
        }
    }
}

fn svr_specs(g: &SvrGrid, p: usize, target_std: f64) -> Vec<ForecasterSpec> {
    let kernels: Vec<Kernel> = if g.gamma_scale.is_empty() {
        vec![Kernel::Linear]
    } else {
        g.gamma_scale.iter().map(|s| Kernel::Rbf { gamma: s / p as f64 }).collect()
    };
    let mut out = Vec::new();
    for &c in &g.c {
        for &e in &g.epsilon_scale {
            for &kernel in &kernels {
                let mut spec = SvrSpec::new(c, e * target_std, kernel);
                spec.max_rows = g.max_rows;
                out.push(ForecasterSpec::Svr(spec));
            }
        }
    }
    out
}

impl GridConfig {
    /// Concrete candidates for `kind` given the training design.
    pub fn resolve(&self, kind: ModelKind, p: usize, target_std: f64, seed: u64) -> Vec<ForecasterSpec> {
        match kind {
            ModelKind::Ridge => self.ridge.lambda.iter().map(|&lambda| ForecasterSpec::Ridge { lambda }).collect(),
            ModelKind::Lasso => self.lasso.lambda.iter().map(|&lambda| ForecasterSpec::Lasso { lambda }).collect(),
            ModelKind::ElasticNet => {
                let alphas = if self.elastic_net.alpha.is_empty() { vec![0.5] } else { self.elastic_net.alpha.clone() };
                self.elastic_net
                    .lambda
                    .iter()
                    .flat_map(|&lambda| alphas.iter().map(move |&alpha| ForecasterSpec::ElasticNet { lambda, alpha }))
                    .collect()
            }
            ModelKind::Svr => svr_specs(&self.svr, p, target_std),
            ModelKind::Gp => {
                let mut out = Vec::new();
                for &noise_var in &self.gp.noise_var {
                    for &signal_var in &self.gp.signal_var {
                        for &s in &self.gp.gamma_scale {
                            out.push(ForecasterSpec::Gp(GpSpec {
                                gamma: s / p as f64,
                                signal_var,
                                noise_var,
                                max_rows: self.gp.max_rows,
                            }));
                        }
                    }
                }
                out
            }
            ModelKind::Knn => self.knn.k.iter().map(|&k| ForecasterSpec::Knn { k }).collect(),
            ModelKind::RandomForest => {
                let f = &self.random_forest;
                let mut out = Vec::new();
                for &max_depth in &f.max_depth {
                    for &m in &f.mtry {
                        out.push(ForecasterSpec::RandomForest(ForestSpec {
                            n_trees: f.n_trees,
                            max_depth,
                            min_leaf: f.min_leaf,
                            mtry: m.resolve(p),
                            seed,
                            bootstrap: true,
                        }));
                    }
                }
                out
            }
            ModelKind::Mlp => {
                let m = &self.mlp;
                let mut out = Vec::new();
                for hidden in &m.hidden {
                    for &learning_rate in &m.learning_rate {
                        out.push(ForecasterSpec::Mlp(MlpSpec {
                            hidden: hidden.clone(),
                            activation: Default::default(),
                            learning_rate,
                            epochs: m.epochs,
                            batch: m.batch,
                            seed,
                        }));
                    }
                }
                out
            }
        }
    }

    pub fn resolve_stack(&self, m: usize, target_std: f64) -> Vec<ForecasterSpec> {
        svr_specs(&self.svr_stack, m, target_std)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_sizes() {
        let g = GridConfig::default();
        assert_eq!(g.resolve(ModelKind::Ridge, 21, 1.0, 0).len(), 7);
        assert_eq!(g.resolve(ModelKind::ElasticNet, 21, 1.0, 0).len(), 35);
        assert_eq!(g.resolve(ModelKind::Svr, 21, 1.0, 0).len(), 36);
        assert_eq!(g.resolve(ModelKind::RandomForest, 21, 1.0, 0).len(), 6);
        assert_eq!(g.resolve(ModelKind::Knn, 21, 1.0, 0).len(), 4);
    }

    #[test]
    fn mtry_rules() {
        assert_eq!(Mtry::Third.resolve(21), 7);
        assert_eq!(Mtry::Sqrt.resolve(21), 5);
        assert_eq!(Mtry::Fixed(50).resolve(21), 21);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let g: GridConfig = serde_json::from_str(r#"{"knn": {"k": [7]}}"#).unwrap();
        assert_eq!(g.knn.k, vec![7]);
        assert_eq!(g.ridge, GridConfig::default().ridge);
        assert!(serde_json::from_str::<GridConfig>(r#"{"knn": {"kk": [7]}}"#).is_err());
    }
}
