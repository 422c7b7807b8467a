//! Bagged CART regression forest with per-split feature subsampling.
//!
//! Each tree is grown on a bootstrap resample of size `n`. At every node
//! `mtry` candidate variables are drawn without replacement and the split
//! minimising the weighted child SSE over midpoint thresholds is taken. Ties
//! go to the lowest variable index, then the lowest threshold. A node with
//! fewer than `2 * min_node` observations, zero SSE, no SSE reduction, or at
//! `max_depth` becomes a leaf.
//!
//! Tree `t` draws all of its randomness from a stream keyed by `(seed, t)`,
//! so a forest is identical however many threads build it.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::datagen::Dataset;
use crate::error::{Result, VimpError};
use crate::importance::{Model, Predictor};
use crate::rng::{self, Token};

/// `max(2, floor(p / 3))`.
pub fn default_mtry(p: usize) -> usize {
    (p / 3).max(2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Candidate variables per split; `None` means [`default_mtry`], capped at `p`.
    pub mtry: Option<usize>,
    pub min_node: usize,
    pub max_depth: Option<usize>,
    /// Grow each tree on a bootstrap resample; otherwise on the full sample.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_trees: 500, mtry: None, min_node: 5, max_depth: None, bootstrap: true, seed: 0 }
    }
}

impl ForestConfig {
    pub fn resolved_mtry(&self, p: usize) -> usize {
        self.mtry.unwrap_or_else(|| default_mtry(p).min(p))
    }

    fn validate(&self, p: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(VimpError::InvalidConfig("n_trees must be positive".into()));
        }
        if self.min_node == 0 {
            return Err(VimpError::InvalidConfig("min_node must be at least 1".into()));
        }
        let mtry = self.resolved_mtry(p);
        if mtry == 0 || mtry > p {
            return Err(VimpError::InvalidConfig(format!("mtry must lie in 1..={p}, got {mtry}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// A regression tree stored as a flat node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, x: &DMatrix<f64>, row: usize) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[(row, feature)] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub config: ForestConfig,
    pub p: usize,
}

pub fn train(data: &Dataset, config: &ForestConfig) -> Result<ForestModel> {
    let (n, p) = (data.n(), data.p());
    config.validate(p)?;
    if n < 2 * config.min_node {
        return Err(VimpError::InsufficientData(format!(
            "forest needs at least 2 * min_node = {} observations, got {n}",
            2 * config.min_node
        )));
    }
    let grower = Grower {
        x: &data.x,
        y: data.y.as_slice(),
        mtry: config.resolved_mtry(p),
        min_node: config.min_node,
        max_depth: config.max_depth.unwrap_or(usize::MAX),
    };
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(config.seed, &[Token::Label("tree"), t.into()]);
            let mut idx: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grower.grow(&mut idx, &mut rng)
        })
        .collect();
    Ok(ForestModel { trees, config: config.clone(), p })
}

pub fn predict(model: &ForestModel, x: &DMatrix<f64>) -> Result<DVector<f64>> {
    if x.ncols() != model.p {
        return Err(VimpError::DimensionMismatch { expected: model.p, actual: x.ncols() });
    }
    let k = model.trees.len() as f64;
    Ok(DVector::from_fn(x.nrows(), |row, _| {
        model.trees.iter().map(|t| t.predict_row(x, row)).sum::<f64>() / k
    }))
}

struct Grower<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [f64],
    mtry: usize,
    min_node: usize,
    max_depth: usize,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Grower<'_> {
    fn grow(&self, idx: &mut [usize], rng: &mut ChaCha8Rng) -> Tree {
        let mut nodes = Vec::new();
        let mut scratch = Vec::with_capacity(idx.len());
        self.build(idx, 0, rng, &mut nodes, &mut scratch);
        Tree { nodes }
    }

    fn build(
        &self,
        idx: &mut [usize],
        depth: usize,
        rng: &mut ChaCha8Rng,
        nodes: &mut Vec<Node>,
        scratch: &mut Vec<(f64, f64)>,
    ) -> usize {
        let at = nodes.len();
        let count = idx.len() as f64;
        let sum: f64 = idx.iter().map(|&r| self.y[r]).sum();
        let mean = sum / count;
        nodes.push(Node::Leaf(mean));

        if idx.len() < 2 * self.min_node || depth >= self.max_depth {
            return at;
        }
        let sse: f64 = idx.iter().map(|&r| (self.y[r] - mean).powi(2)).sum();
        if sse <= 0.0 {
            return at;
        }

        let Some(best) = self.best_split(idx, sum, rng, scratch) else {
            return at;
        };
        // score is sum_l^2/n_l + sum_r^2/n_r; reduction is score - sum^2/n
        if best.score - sum * sum / count <= 1e-12 * sse {
            return at;
        }

        let col = self.column(best.feature);
        let mut split = 0;
        for k in 0..idx.len() {
            if col[idx[k]] <= best.threshold {
                idx.swap(k, split);
                split += 1;
            }
        }
        let (l, r) = idx.split_at_mut(split);
        let left = self.build(l, depth + 1, rng, nodes, scratch);
        let right = self.build(r, depth + 1, rng, nodes, scratch);
        nodes[at] = Node::Split { feature: best.feature, threshold: best.threshold, left, right };
        at
    }

    fn column(&self, j: usize) -> &[f64] {
        let n = self.x.nrows();
        &self.x.as_slice()[j * n..(j + 1) * n]
    }

    fn best_split(
        &self,
        idx: &[usize],
        total: f64,
        rng: &mut ChaCha8Rng,
        scratch: &mut Vec<(f64, f64)>,
    ) -> Option<BestSplit> {
        let p = self.x.ncols();
        let mut features = sample(rng, p, self.mtry).into_vec();
        features.sort_unstable();

        let count = idx.len();
        let mut best: Option<BestSplit> = None;
        for feature in features {
            let col = self.column(feature);
            scratch.clear();
            scratch.extend(idx.iter().map(|&r| (col[r], self.y[r])));
            scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

            let mut left_sum = 0.0;
            for k in 0..count - 1 {
                left_sum += scratch[k].1;
                let (lo, hi) = (scratch[k].0, scratch[k + 1].0);
                if lo == hi {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = (count - k - 1) as f64;
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / nl + right_sum * right_sum / nr;
                if best.as_ref().map_or(true, |b| score > b.score) {
                    best = Some(BestSplit { feature, threshold: 0.5 * (lo + hi), score });
                }
            }
        }
        best
    }
}

/// A random forest as an importance [`Predictor`]. The seed passed to
/// `train` replaces `config.seed`.
#[derive(Debug, Clone, Default)]
pub struct RandomForest {
    pub config: ForestConfig,
}

impl Predictor for RandomForest {
    type Model = ForestModel;

    fn train(&self, data: &Dataset, seed: u64) -> Result<ForestModel> {
        train(data, &ForestConfig { seed, ..self.config.clone() })
    }
}

impl Model for ForestModel {
    fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        predict(self, x)
    }
}
