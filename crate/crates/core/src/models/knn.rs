use serde::{Deserialize, Serialize};

/// k-nearest-neighbour regressor over stored (standardized) rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub n_features: usize,
    pub rows: Vec<f64>,
    pub targets: Vec<f64>,
}

impl Knn {
    pub fn predict(&self, query: &[f64]) -> f64 {
        let p = self.n_features;
        let mut dist: Vec<(f64, usize)> = self
            .targets
            .iter()
            .enumerate()
            .map(|(i, _)| {
                let d: f64 = self.rows[i * p..(i + 1) * p]
                    .iter()
                    .zip(query)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (d, i)
            })
            .collect();
        let k = self.k.min(dist.len());
        // ties in distance go to the earlier training row
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, cmp);
        }
        let mut nearest: Vec<(f64, usize)> = dist[..k].to_vec();
        nearest.sort_by(cmp);
        nearest.iter().map(|(_, i)| self.targets[*i]).sum::<f64>() / k as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_and_all_neighbours() {
        let knn = Knn { k: 1, n_features: 1, rows: vec![0.0, 1.0, 2.0], targets: vec![5.0, 7.0, 9.0] };
        assert_eq!(knn.predict(&[1.0]), 7.0);
        assert_eq!(knn.predict(&[1.4]), 7.0);
        let all = Knn { k: 3, ..knn };
        assert_eq!(all.predict(&[-10.0]), 7.0);
    }
}
