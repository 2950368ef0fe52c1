use serde::{Deserialize, Serialize};

use crate::baselines::{check_query, check_training};
use crate::error::{Error, Result};
use crate::mode::{DegradationMode, NUM_CLASSES};

pub const DEFAULT_K: usize = 6;

/// Brute-force Euclidean k-nearest-neighbour classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub vectors: Vec<Vec<f64>>,
    pub labels: Vec<DegradationMode>,
}

pub fn knn_fit(vectors: Vec<Vec<f64>>, labels: Vec<DegradationMode>, k: usize) -> Result<KnnModel> {
    check_training(&vectors, &labels)?;
    if k == 0 || k > vectors.len() {
        return Err(Error::Model(format!("k={k} must be in 1..={}", vectors.len())));
    }
    Ok(KnnModel { k, vectors, labels })
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KnnModel {
    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    /// Indices and distances of the k nearest training vectors; equal
    /// distances are ordered by training index.
    pub fn neighbors(&self, query: &[f64]) -> Result<Vec<(usize, f64)>> {
        check_query(query, self.dim())?;
        let mut all: Vec<(usize, f64)> = self
            .vectors
            .iter()
            .enumerate()
            .map(|(i, v)| (i, squared_distance(v, query)))
            .collect();
        let by_distance = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
        if self.k < all.len() {
            all.select_nth_unstable_by(self.k - 1, by_distance);
            all.truncate(self.k);
        }
        all.sort_by(by_distance);
        Ok(all.into_iter().map(|(i, d)| (i, d.sqrt())).collect())
    }

    /// Fraction of the k neighbours voting for each class.
    pub fn vote_fractions(&self, query: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        let mut out = [0.0; NUM_CLASSES];
        for (i, _) in self.neighbors(query)? {
            out[self.labels[i].index()] += 1.0 / self.k as f64;
        }
        Ok(out)
    }

    /// Majority vote; ties go to the class with the smaller mean neighbour
    /// distance, then to the lowest class code.
    pub fn predict(&self, query: &[f64]) -> Result<DegradationMode> {
        let mut votes = [0usize; NUM_CLASSES];
        let mut dist_sum = [0.0f64; NUM_CLASSES];
        for (i, d) in self.neighbors(query)? {
            let c = self.labels[i].index();
            votes[c] += 1;
            dist_sum[c] += d;
        }
        let top = *votes.iter().max().expect("four classes");
        let mut best: Option<(usize, f64)> = None;
        for c in 0..NUM_CLASSES {
            if votes[c] != top {
                continue;
            }
            let mean = dist_sum[c] / votes[c] as f64;
            if best.is_none_or(|(_, m)| mean < m) {
                best = Some((c, mean));
            }
        }
        Ok(DegradationMode::ALL[best.expect("at least one voted class").0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use rand::Rng;

    use DegradationMode::*;

    #[test]
    fn exact_match_with_k1() {
        let m = knn_fit(vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![Normal, Sudden], 1).unwrap();
        assert_eq!(m.predict(&[1.0, 1.0]).unwrap(), Sudden);
    }

    #[test]
    fn majority_of_three() {
        let m = knn_fit(
            vec![vec![0.0], vec![0.1], vec![0.2], vec![5.0]],
            vec![Gradual, Gradual, Rapid, Normal],
            3,
        )
        .unwrap();
        assert_eq!(m.predict(&[0.05]).unwrap(), Gradual);
    }

    #[test]
    fn tie_goes_to_closer_class_then_lower_code() {
        let m = knn_fit(vec![vec![1.0], vec![-3.0]], vec![Normal, Sudden], 2).unwrap();
        assert_eq!(m.predict(&[0.0]).unwrap(), Normal);
        let m = knn_fit(vec![vec![3.0], vec![-1.0]], vec![Normal, Sudden], 2).unwrap();
        assert_eq!(m.predict(&[0.0]).unwrap(), Sudden);
        let m = knn_fit(vec![vec![1.0], vec![-1.0]], vec![Rapid, Gradual], 2).unwrap();
        assert_eq!(m.predict(&[0.0]).unwrap(), Gradual);
    }

    #[test]
    fn invalid_k_and_empty_set() {
        assert!(matches!(knn_fit(vec![], vec![], 1), Err(Error::Model(_))));
        assert!(knn_fit(vec![vec![0.0]], vec![Normal], 2).is_err());
        assert!(knn_fit(vec![vec![0.0]], vec![Normal], 0).is_err());
    }

    /// Exhaustive oracle: full sort by (distance, index), then the same vote rule.
    fn oracle(vectors: &[Vec<f64>], labels: &[DegradationMode], k: usize, q: &[f64]) -> DegradationMode {
        let mut d: Vec<(f64, usize)> = vectors
            .iter()
            .enumerate()
            .map(|(i, v)| (v.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(), i))
            .collect();
        d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut votes = [0usize; 4];
        let mut sums = [0.0; 4];
        for &(dist, i) in &d[..k] {
            votes[labels[i].index()] += 1;
            sums[labels[i].index()] += dist;
        }
        let top = *votes.iter().max().unwrap();
        let mut tied: Vec<(f64, usize)> = (0..4)
            .filter(|&c| votes[c] == top)
            .map(|c| (sums[c] / top as f64, c))
            .collect();
        tied.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        DegradationMode::ALL[tied[0].1]
    }

    #[test]
    fn matches_exhaustive_oracle() {
        let mut rng = seeds::substream(4, 0);
        let vectors: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..6).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let labels: Vec<DegradationMode> = (0..50).map(|_| DegradationMode::ALL[rng.gen_range(0..4)]).collect();
        let m = knn_fit(vectors.clone(), labels.clone(), DEFAULT_K).unwrap();
        for _ in 0..200 {
            let q: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.0)).collect();
            assert_eq!(m.predict(&q).unwrap(), oracle(&vectors, &labels, DEFAULT_K, &q));
        }
    }
}
