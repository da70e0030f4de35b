//! Regression trees grown greedily on squared error, and a random forest
//! of them with bootstrap rows and per-split feature subsampling.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub mtry: usize,
}

/// Best split of the rows `idx` on one feature: `(gain, threshold)`.
///
/// Gain is the decrease in the sum of squared errors. Only thresholds
/// between distinct consecutive values that leave at least `min_leaf` rows
/// on each side are considered; the first maximizer in ascending order wins.
fn best_split_on(x: &[f64], p: usize, y: &[f64], idx: &mut [usize], feature: usize, min_leaf: usize) -> Option<(f64, f64)> {
    idx.sort_by(|&a, &b| x[a * p + feature].total_cmp(&x[b * p + feature]).then(a.cmp(&b)));
    let n = idx.len();
    let total: f64 = idx.iter().map(|&i| y[i]).sum();
    let base = total * total / n as f64;
    let mut left = 0.0;
    let mut best: Option<(f64, f64)> = None;
    for k in 0..n - 1 {
        left += y[idx[k]];
        let nl = k + 1;
        let nr = n - nl;
        if nl < min_leaf || nr < min_leaf {
            continue;
        }
        let (xa, xb) = (x[idx[k] * p + feature], x[idx[k + 1] * p + feature]);
        if xa == xb {
            continue;
        }
        let right = total - left;
        let gain = left * left / nl as f64 + right * right / nr as f64 - base;
        if best.is_none_or(|(g, _)| gain > g) {
            let mid = 0.5 * (xa + xb);
            // guard against the midpoint rounding onto the upper value
            let threshold = if mid < xb { mid } else { xa };
            best = Some((gain, threshold));
        }
    }
    best
}

struct Builder<'a> {
    x: &'a [f64],
    p: usize,
    y: &'a [f64],
    params: TreeParams,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn leaf_value(&self, idx: &[usize]) -> f64 {
        let first = self.y[idx[0]];
        if idx.iter().all(|&i| self.y[i] == first) {
            first
        } else {
            idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64
        }
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize, rng: &mut impl Rng) -> usize {
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { value: self.leaf_value(idx) });
        let constant = idx.iter().all(|&i| self.y[i] == self.y[idx[0]]);
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if constant || !depth_ok || idx.len() < 2 * self.params.min_leaf.max(1) {
            return at;
        }
        let mut features: Vec<usize> = if self.params.mtry >= self.p {
            (0..self.p).collect()
        } else {
            sample(rng, self.p, self.params.mtry).into_vec()
        };
        features.sort_unstable();
        let mut best: Option<(f64, usize, f64)> = None;
        for &f in &features {
            if let Some((gain, thr)) = best_split_on(self.x, self.p, self.y, idx, f, self.params.min_leaf.max(1)) {
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, thr));
                }
            }
        }
        let Some((gain, feature, threshold)) = best else { return at };
        if !(gain > 0.0) {
            return at;
        }
        let x = self.x;
        let p = self.p;
        idx.sort_by(|&a, &b| x[a * p + feature].total_cmp(&x[b * p + feature]).then(a.cmp(&b)));
        let split = idx.partition_point(|&i| x[i * p + feature] <= threshold);
        let (left_idx, right_idx) = idx.split_at_mut(split);
        let left = self.grow(left_idx, depth + 1, rng);
        let right = self.grow(right_idx, depth + 1, rng);
        self.nodes[at] = Node::Split { feature, threshold, left, right };
        at
    }
}

/// Grows one tree on the rows listed in `idx` (repeats allowed).
pub fn grow_tree(x: &[f64], p: usize, y: &[f64], idx: &mut [usize], params: TreeParams, rng: &mut impl Rng) -> Tree {
    let mut b = Builder { x, p, y, params, nodes: Vec::new() };
    b.grow(idx, 0, rng);
    Tree { nodes: b.nodes }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestSpec {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub mtry: usize,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub bootstrap: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn fit(x: &[f64], p: usize, y: &[f64], spec: &ForestSpec) -> Forest {
        let n = y.len();
        let params = TreeParams { max_depth: spec.max_depth, min_leaf: spec.min_leaf, mtry: spec.mtry };
        let trees = (0..spec.n_trees)
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                rng.set_stream(t as u64);
                let mut idx: Vec<usize> = if spec.bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                grow_tree(x, p, y, &mut idx, params, &mut rng)
            })
            .collect();
        Forest { trees }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }
}
