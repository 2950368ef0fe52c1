use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{check_query, check_training};
use crate::error::{Error, Result};
use crate::mode::{DegradationMode, NUM_CLASSES};
use crate::seeds;

type Counts = [u32; NUM_CLASSES];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features tried per split; `None` means `floor(sqrt(dim))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_features: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        counts: Counts,
    },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub config: ForestConfig,
    pub seed: u64,
    pub dim: usize,
    pub trees: Vec<DecisionTree>,
}

/// Gini impurity `1 - sum p_c^2`; zero for an empty node.
pub fn gini(counts: &[u32]) -> f64 {
    let n: u32 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn majority(counts: &[u32]) -> usize {
    let mut best = 0;
    for c in 1..counts.len() {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    best
}

fn count(labels: &[usize], idx: &[usize]) -> Counts {
    let mut c = [0; NUM_CLASSES];
    for &i in idx {
        c[labels[i]] += 1;
    }
    c
}

struct Candidate {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn best_split_on(x: &[Vec<f64>], y: &[usize], idx: &[usize], feature: usize, total: &Counts) -> Option<Candidate> {
    let mut pairs: Vec<(f64, usize)> = idx.iter().map(|&i| (x[i][feature], y[i])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pairs.len() as f64;
    let mut left = [0u32; NUM_CLASSES];
    let mut best: Option<Candidate> = None;
    for i in 0..pairs.len() - 1 {
        left[pairs[i].1] += 1;
        let (lo, hi) = (pairs[i].0, pairs[i + 1].0);
        if lo >= hi {
            continue;
        }
        let mut right = *total;
        for c in 0..NUM_CLASSES {
            right[c] -= left[c];
        }
        let nl = (i + 1) as f64;
        let impurity = (nl * gini(&left) + (n - nl) * gini(&right)) / n;
        if best.as_ref().is_none_or(|b| impurity < b.impurity) {
            let mid = lo + (hi - lo) / 2.0;
            let threshold = if mid < hi { mid } else { lo };
            best = Some(Candidate {
                feature,
                threshold,
                impurity,
            });
        }
    }
    best
}

fn best_split(
    x: &[Vec<f64>],
    y: &[usize],
    idx: &[usize],
    features: impl Iterator<Item = usize>,
    total: &Counts,
) -> Option<Candidate> {
    let mut best: Option<Candidate> = None;
    for f in features {
        if let Some(c) = best_split_on(x, y, idx, f, total) {
            if best.as_ref().is_none_or(|b| c.impurity < b.impurity) {
                best = Some(c);
            }
        }
    }
    best
}

/// Greedy CART growth with no depth limit and one sample minimum per leaf.
/// If none of the sampled features can split a node, all features are tried.
pub fn grow_tree(
    x: &[Vec<f64>],
    y: &[usize],
    sample: Vec<usize>,
    max_features: usize,
    rng: &mut ChaCha8Rng,
) -> DecisionTree {
    let dim = x[0].len();
    let mut nodes = vec![Node::Leaf {
        counts: [0; NUM_CLASSES],
    }];
    let mut stack = vec![(0usize, sample)];
    while let Some((id, idx)) = stack.pop() {
        let counts = count(y, &idx);
        if counts.iter().filter(|&&c| c > 0).count() <= 1 {
            nodes[id] = Node::Leaf { counts };
            continue;
        }
        let sampled = index::sample(rng, dim, max_features.min(dim));
        let split = best_split(x, y, &idx, sampled.iter(), &counts).or_else(|| best_split(x, y, &idx, 0..dim, &counts));
        let Some(split) = split else {
            nodes[id] = Node::Leaf { counts };
            continue;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| x[i][split.feature] <= split.threshold);
        let left = nodes.len();
        nodes.push(Node::Leaf {
            counts: [0; NUM_CLASSES],
        });
        let right = nodes.len();
        nodes.push(Node::Leaf {
            counts: [0; NUM_CLASSES],
        });
        nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        stack.push((right, right_idx));
        stack.push((left, left_idx));
    }
    DecisionTree { nodes }
}

impl DecisionTree {
    pub fn leaf_counts(&self, query: &[f64]) -> &Counts {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if query[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict(&self, query: &[f64]) -> DegradationMode {
        DegradationMode::ALL[majority(self.leaf_counts(query))]
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

fn fit_tree(
    x: &[Vec<f64>],
    y: &[usize],
    config: &ForestConfig,
    max_features: usize,
    seed: u64,
    tree: usize,
) -> DecisionTree {
    let mut rng = seeds::substream(seed, tree as u64);
    let n = x.len();
    let sample: Vec<usize> = if config.bootstrap {
        (0..n).map(|_| rng.gen_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    grow_tree(x, y, sample, max_features, &mut rng)
}

/// Trees are grown on worker threads; each tree draws from its own stream,
/// so the fitted forest does not depend on the thread count.
pub fn rf_fit(
    vectors: &[Vec<f64>],
    labels: &[DegradationMode],
    config: ForestConfig,
    seed: u64,
) -> Result<RandomForestModel> {
    let dim = check_training(vectors, labels)?;
    if config.n_trees == 0 {
        return Err(Error::Config("n_trees must be >= 1".into()));
    }
    let max_features = config
        .max_features
        .unwrap_or_else(|| ((dim as f64).sqrt().floor() as usize).max(1));
    if max_features == 0 {
        return Err(Error::Config("max_features must be >= 1".into()));
    }
    let y: Vec<usize> = labels.iter().map(|l| l.index()).collect();
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(config.n_trees);
    let mut trees: Vec<Option<DecisionTree>> = vec![None; config.n_trees];
    std::thread::scope(|scope| {
        for (w, chunk) in trees.chunks_mut(config.n_trees.div_ceil(workers)).enumerate() {
            let y = &y;
            let config = &config;
            let start = w * config.n_trees.div_ceil(workers);
            scope.spawn(move || {
                for (offset, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(fit_tree(vectors, y, config, max_features, seed, start + offset));
                }
            });
        }
    });
    Ok(RandomForestModel {
        config,
        seed,
        dim,
        trees: trees.into_iter().map(|t| t.expect("every tree fitted")).collect(),
    })
}

impl RandomForestModel {
    pub fn votes(&self, query: &[f64]) -> Result<[u32; NUM_CLASSES]> {
        check_query(query, self.dim)?;
        let mut votes = [0u32; NUM_CLASSES];
        for tree in &self.trees {
            votes[tree.predict(query).index()] += 1;
        }
        Ok(votes)
    }

    pub fn vote_fractions(&self, query: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        let votes = self.votes(query)?;
        let n = self.trees.len() as f64;
        Ok(votes.map(|v| v as f64 / n))
    }

    /// Majority vote over trees; ties go to the lowest class code.
    pub fn predict(&self, query: &[f64]) -> Result<DegradationMode> {
        Ok(DegradationMode::ALL[majority(&self.votes(query)?)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use DegradationMode::*;

    fn random_set(n: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<DegradationMode>) {
        let mut rng = seeds::substream(seed, 0);
        let v: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let l = (0..n).map(|_| DegradationMode::ALL[rng.gen_range(0..4)]).collect();
        (v, l)
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[2, 2, 0, 0]), 0.5);
        assert_eq!(gini(&[5, 0, 0, 0]), 0.0);
        assert!((gini(&[1, 1, 1, 1]) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn pure_training_set_gives_constant_tree() {
        let (v, _) = random_set(20, 3, 1);
        let l = vec![Rapid; 20];
        let m = rf_fit(
            &v,
            &l,
            ForestConfig {
                n_trees: 1,
                ..ForestConfig::default()
            },
            0,
        )
        .unwrap();
        assert_eq!(m.trees[0].nodes.len(), 1);
        let (q, _) = random_set(10, 3, 2);
        assert!(q.iter().all(|x| m.predict(x).unwrap() == Rapid));
    }

    #[test]
    fn unbagged_tree_shatters_training_set() {
        let (v, l) = random_set(200, 5, 3);
        let config = ForestConfig {
            n_trees: 1,
            max_features: Some(2),
            bootstrap: false,
        };
        let m = rf_fit(&v, &l, config, 7).unwrap();
        for (x, y) in v.iter().zip(&l) {
            assert_eq!(m.predict(x).unwrap(), *y);
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let (v, l) = random_set(120, 6, 4);
        let config = ForestConfig {
            n_trees: 10,
            ..ForestConfig::default()
        };
        let a = rf_fit(&v, &l, config, 5).unwrap();
        let b = rf_fit(&v, &l, config, 5).unwrap();
        let c = rf_fit(&v, &l, config, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn forest_vote_matches_recount() {
        let (v, l) = random_set(150, 4, 8);
        let m = rf_fit(
            &v,
            &l,
            ForestConfig {
                n_trees: 15,
                ..ForestConfig::default()
            },
            1,
        )
        .unwrap();
        let (queries, _) = random_set(50, 4, 9);
        for q in &queries {
            let mut counts = std::collections::BTreeMap::new();
            for t in &m.trees {
                *counts.entry(t.predict(q).code()).or_insert(0) += 1;
            }
            let top = counts.values().max().copied().unwrap();
            let expected = counts.iter().find(|(_, &n)| n == top).map(|(&c, _)| c).unwrap();
            assert_eq!(m.predict(q).unwrap().code(), expected);
        }
    }

    #[test]
    fn constant_features_become_leaf() {
        let v = vec![vec![1.0, 1.0]; 6];
        let l = vec![Normal, Gradual, Normal, Gradual, Normal, Sudden];
        let m = rf_fit(
            &v,
            &l,
            ForestConfig {
                n_trees: 1,
                bootstrap: false,
                max_features: None,
            },
            0,
        )
        .unwrap();
        assert_eq!(m.trees[0].nodes.len(), 1);
        assert_eq!(m.predict(&[1.0, 1.0]).unwrap(), Normal);
    }
}
