//! Isolation forest anomaly scoring.
//!
//! Trees split on a random non-constant feature at a uniform threshold,
//! `x < t` going left, down to depth `⌈log₂ ψ⌉`. Scores are
//! `s = 2^(−E[h(x)] / c(ψ))`; the top `round(contamination · N)` rows by
//! score are flagged, ties broken by lower row index.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ANOMALY_FEATURES;
use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_9;

/// Average unsuccessful-search path length in a binary search tree of `n` keys.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IsolationForestConfig {
    pub n_trees: usize,
    pub subsample_size: usize,
    pub contamination: f64,
    pub seed: u64,
    pub features: Vec<String>,
}

impl Default for IsolationForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            subsample_size: 256,
            contamination: 0.01,
            seed: 42,
            features: ANOMALY_FEATURES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl IsolationForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.subsample_size < 2 {
            return Err(Error::InvalidConfig("isolation forest needs n_trees ≥ 1 and subsample_size ≥ 2".into()));
        }
        if !(self.contamination > 0.0 && self.contamination < 0.5) {
            return Err(Error::InvalidConfig(format!("contamination {} outside (0, 0.5)", self.contamination)));
        }
        if self.features.is_empty() {
            return Err(Error::InvalidConfig("no anomaly features".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { size: usize },
}

/// Arena-allocated tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    pub nodes: Vec<Node>,
}

impl IsolationTree {
    /// Depth of the leaf reached by `x`, plus `c(size)` for unresolved leaves.
    pub fn path_length(&self, x: &[f64]) -> f64 {
        let mut node = 0;
        let mut depth = 0.0;
        loop {
            match self.nodes[node] {
                Node::Leaf { size } => return depth + average_path_length(size),
                Node::Split { feature, threshold, left, right } => {
                    node = if x[feature] < threshold { left } else { right };
                    depth += 1.0;
                }
            }
        }
    }

    fn grow(data: &[Vec<f64>], rows: Vec<usize>, height_limit: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut tree = Self { nodes: Vec::new() };
        tree.grow_node(data, rows, 0, height_limit, rng);
        tree
    }

    fn grow_node(
        &mut self,
        data: &[Vec<f64>],
        rows: Vec<usize>,
        depth: usize,
        height_limit: usize,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { size: rows.len() });
        if depth >= height_limit || rows.len() <= 1 {
            return id;
        }
        let n_features = data[rows[0]].len();
        let ranges: Vec<(usize, f64, f64)> = (0..n_features)
            .filter_map(|j| {
                let (lo, hi) = rows
                    .iter()
                    .map(|&r| data[r][j])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                (lo < hi).then_some((j, lo, hi))
            })
            .collect();
        if ranges.is_empty() {
            return id;
        }
        let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
        let threshold = rng.random_range(lo..hi);
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| data[r][feature] < threshold);
        let left = self.grow_node(data, left_rows, depth + 1, height_limit, rng);
        let right = self.grow_node(data, right_rows, depth + 1, height_limit, rng);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForest {
    pub trees: Vec<IsolationTree>,
    /// Effective subsample size ψ used for normalisation.
    pub subsample_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationResult {
    pub scores: Vec<f64>,
    pub flags: Vec<bool>,
}

impl IsolationResult {
    pub fn n_flagged(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

impl IsolationForest {
    pub fn fit(data: &[Vec<f64>], config: &IsolationForestConfig) -> Result<Self> {
        config.validate()?;
        if data.len() < 2 {
            return Err(Error::TooFewRecords { needed: 2, got: data.len() });
        }
        let width = data[0].len();
        if let Some(row) = data.iter().find(|r| r.len() != width) {
            return Err(Error::DimensionMismatch { expected: width, got: row.len() });
        }
        let psi = config.subsample_size.min(data.len());
        let height_limit = (psi as f64).log2().ceil() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let trees = (0..config.n_trees)
            .map(|_| {
                let rows = index::sample(&mut rng, data.len(), psi).into_vec();
                IsolationTree::grow(data, rows, height_limit, &mut rng)
            })
            .collect();
        Ok(Self { trees, subsample_size: psi })
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let mean_depth = self.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / self.trees.len() as f64;
        2f64.powf(-mean_depth / average_path_length(self.subsample_size))
    }

    /// Flags exactly `round(contamination · N)` rows.
    pub fn detect(&self, data: &[Vec<f64>], contamination: f64) -> IsolationResult {
        let scores: Vec<f64> = data.iter().map(|x| self.score(x)).collect();
        let k = (contamination * data.len() as f64).round() as usize;
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let mut flags = vec![false; data.len()];
        for &i in order.iter().take(k) {
            flags[i] = true;
        }
        IsolationResult { scores, flags }
    }
}
