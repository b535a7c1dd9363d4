//! Multivariate random forest of CART regression trees.
//!
//! Splits maximise the summed variance reduction of the four standardized
//! targets; leaves store target means in physical units, so every prediction
//! is a convex combination of training targets.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};

const LEAF: i32 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfParams {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Candidate features per split; `None` means `ceil(F / 3)`.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams {
            n_trees: 200,
            max_depth: None,
            min_leaf: 2,
            mtry: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

/// Packed node: 16 bytes, so a small tree stays in cache. A split node's
/// `next` is its left child and the right child follows it. A leaf points
/// to itself with an infinite threshold, so walking a tree is a fixed number
/// of branch-free steps.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    threshold: f64,
    feature: u32,
    next: u32,
}

/// One regression tree. Serialized as parallel node arrays in which
/// `feature[i] == -1` marks a leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeArrays", into = "TreeArrays")]
pub struct Tree {
    nodes: Vec<Node>,
    /// Leaf value of each node; unused for split nodes.
    values: Vec<[f64; 4]>,
    depth: usize,
}

#[derive(Serialize, Deserialize)]
struct TreeArrays {
    feature: Vec<i32>,
    threshold: Vec<f64>,
    left: Vec<u32>,
    right: Vec<u32>,
    value: Vec<[f64; 4]>,
}

impl From<Tree> for TreeArrays {
    fn from(t: Tree) -> Self {
        let n = t.nodes.len();
        let mut a = TreeArrays {
            feature: Vec::with_capacity(n),
            threshold: Vec::with_capacity(n),
            left: Vec::with_capacity(n),
            right: Vec::with_capacity(n),
            value: t.values,
        };
        for (i, node) in t.nodes.iter().enumerate() {
            if node.next as usize == i {
                a.feature.push(LEAF);
                a.threshold.push(0.0);
                a.left.push(0);
                a.right.push(0);
            } else {
                a.feature.push(node.feature as i32);
                a.threshold.push(node.threshold);
                a.left.push(node.next);
                a.right.push(node.next + 1);
            }
        }
        a
    }
}

impl TryFrom<TreeArrays> for Tree {
    type Error = String;

    fn try_from(a: TreeArrays) -> std::result::Result<Self, String> {
        let n = a.feature.len();
        if n == 0 || [a.threshold.len(), a.left.len(), a.right.len(), a.value.len()] != [n; 4] {
            return Err("tree arrays have inconsistent lengths".into());
        }
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            if a.feature[i] == LEAF {
                nodes.push(leaf_node(i));
                continue;
            }
            let (l, r) = (a.left[i] as usize, a.right[i] as usize);
            if a.feature[i] < 0 || r != l + 1 || l <= i || r >= n {
                return Err(format!("tree node {i} is malformed"));
            }
            nodes.push(Node {
                threshold: a.threshold[i],
                feature: a.feature[i] as u32,
                next: l as u32,
            });
        }
        let mut tree = Tree {
            nodes,
            values: a.value,
            depth: 0,
        };
        tree.depth = tree.measure_depth();
        Ok(tree)
    }
}

fn leaf_node(index: usize) -> Node {
    Node {
        threshold: f64::INFINITY,
        feature: 0,
        next: index as u32,
    }
}

impl Tree {
    fn is_leaf(&self, i: usize) -> bool {
        self.nodes[i].next as usize == i
    }

    #[inline]
    fn leaf_for(&self, x: &[f64]) -> &[f64; 4] {
        let mut pos = 0usize;
        loop {
            let node = self.nodes[pos];
            let next = node.next as usize + (x[node.feature as usize] > node.threshold) as usize;
            if next == pos {
                return &self.values[pos];
            }
            pos = next;
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_leaves(&self) -> usize {
        (0..self.nodes.len()).filter(|&i| self.is_leaf(i)).count()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    fn measure_depth(&self) -> usize {
        let mut deepest = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            if self.is_leaf(i) {
                deepest = deepest.max(d);
            } else {
                let l = self.nodes[i].next as usize;
                stack.push((l, d + 1));
                stack.push((l + 1, d + 1));
            }
        }
        deepest
    }

    fn validate(&self, n_features: usize) -> Result<()> {
        if self.values.len() != self.nodes.len() {
            return Err(Error::Validation("tree values do not match nodes".into()));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            let ok = self.is_leaf(i)
                || ((node.feature as usize) < n_features
                    && node.next as usize > i
                    && (node.next as usize) + 1 < self.nodes.len());
            if !ok {
                return Err(Error::Validation(format!("tree node {i} is malformed")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_features: usize,
    pub params: RfParams,
    pub trees: Vec<Tree>,
}

impl RandomForest {
    pub fn predict_raw(&self, x: &[f64]) -> [f64; 4] {
        let mut acc = [0.0; 4];
        for tree in &self.trees {
            let v = tree.leaf_for(x);
            for k in 0..4 {
                acc[k] += v[k];
            }
        }
        let n = self.trees.len() as f64;
        acc.map(|a| a / n)
    }

    /// Predictions for `out.len()` rows stored row-major in `x`. Trees are
    /// walked one at a time over the whole batch, several rows in lockstep,
    /// so each tree stays hot in cache.
    pub fn predict_batch(&self, x: &[f64], out: &mut [[f64; 4]]) {
        const LANES: usize = 8;
        const STRIDE: usize = 4;
        let f = self.n_features;
        debug_assert_eq!(x.len(), out.len() * f);
        out.iter_mut().for_each(|o| *o = [0.0; 4]);
        for tree in &self.trees {
            let nodes = &tree.nodes;
            for (rows, chunk) in x.chunks(LANES * f).zip(out.chunks_mut(LANES)) {
                let mut at = [0usize; LANES];
                let mut walked = 0;
                while walked < tree.depth {
                    // a few branch-free steps between checks for all lanes done
                    for _ in 0..STRIDE.min(tree.depth - walked) {
                        for (pos, row) in at.iter_mut().zip(rows.chunks_exact(f)) {
                            let node = nodes[*pos];
                            *pos = node.next as usize + (row[node.feature as usize] > node.threshold) as usize;
                        }
                    }
                    walked += STRIDE;
                    if at.iter().all(|&p| nodes[p].next as usize == p) {
                        break;
                    }
                }
                for (o, pos) in chunk.iter_mut().zip(at) {
                    let v = &tree.values[pos];
                    for k in 0..4 {
                        o[k] += v[k];
                    }
                }
            }
        }
        let n = self.trees.len() as f64;
        for o in out.iter_mut() {
            *o = o.map(|a| a / n);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::Validation("forest has no trees".into()));
        }
        self.trees.iter().try_for_each(|t| t.validate(self.n_features))
    }
}

pub fn train_rf(ds: &Dataset, params: &RfParams) -> Result<RandomForest> {
    if ds.train.is_empty() {
        return Err(Error::Precondition(format!("hour {}: empty train split", ds.hour)));
    }
    if params.n_trees == 0 || params.min_leaf == 0 {
        return Err(Error::Validation("n_trees and min_leaf must be >= 1".into()));
    }
    let n_features = ds.n_features();
    let mtry = params
        .mtry
        .unwrap_or(n_features.div_ceil(3))
        .clamp(1, n_features.max(1));

    let (mean, std) = target_scaling(ds);
    let scaled: Vec<[f64; 4]> = ds
        .y
        .iter()
        .map(|y| std::array::from_fn(|k| (y[k] - mean[k]) / std[k]))
        .collect();

    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(t as u64);
            let rows: Vec<usize> = if params.bootstrap {
                (0..ds.train.len())
                    .map(|_| ds.train[rng.random_range(0..ds.train.len())])
                    .collect()
            } else {
                ds.train.clone()
            };
            let builder = TreeBuilder {
                x: &ds.x,
                y: &ds.y,
                scaled: &scaled,
                n_features,
                mtry,
                min_leaf: params.min_leaf,
                max_depth: params.max_depth.unwrap_or(usize::MAX),
            };
            builder.grow(rows, &mut rng)
        })
        .collect();

    Ok(RandomForest {
        n_features,
        params: *params,
        trees,
    })
}

fn target_scaling(ds: &Dataset) -> ([f64; 4], [f64; 4]) {
    let n = ds.train.len() as f64;
    let mut mean = [0.0; 4];
    for &i in &ds.train {
        for k in 0..4 {
            mean[k] += ds.y[i][k];
        }
    }
    mean = mean.map(|m| m / n);
    let mut var = [0.0; 4];
    for &i in &ds.train {
        for k in 0..4 {
            var[k] += (ds.y[i][k] - mean[k]).powi(2);
        }
    }
    let std = var.map(|v| {
        let s = (v / n).sqrt();
        if s > 1e-12 {
            s
        } else {
            1.0
        }
    });
    (mean, std)
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [[f64; 4]],
    scaled: &'a [[f64; 4]],
    n_features: usize,
    mtry: usize,
    min_leaf: usize,
    max_depth: usize,
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl TreeBuilder<'_> {
    fn grow(&self, mut rows: Vec<usize>, rng: &mut ChaCha8Rng) -> Tree {
        let mut tree = Tree {
            nodes: vec![leaf_node(0)],
            values: vec![[0.0; 4]],
            depth: 0,
        };
        let mut features: Vec<usize> = (0..self.n_features).collect();
        // (node, start, end, depth)
        let mut stack = vec![(0usize, 0usize, rows.len(), 0usize)];
        while let Some((node, start, end, depth)) = stack.pop() {
            let slice = &mut rows[start..end];
            let splittable =
                depth < self.max_depth && slice.len() >= 2 * self.min_leaf && !self.is_pure(slice);
            let split = if splittable {
                features.shuffle(rng);
                self.best_split(slice, &features)
            } else {
                None
            };
            let Some(split) = split else {
                tree.values[node] = self.mean_target(slice);
                tree.depth = tree.depth.max(depth);
                continue;
            };
            let mid = partition(slice, |&r| self.x[r][split.feature] <= split.threshold);
            let left = tree.nodes.len();
            tree.nodes.push(leaf_node(left));
            tree.nodes.push(leaf_node(left + 1));
            tree.values.push([0.0; 4]);
            tree.values.push([0.0; 4]);
            tree.nodes[node] = Node {
                threshold: split.threshold,
                feature: split.feature as u32,
                next: left as u32,
            };
            stack.push((left + 1, start + mid, end, depth + 1));
            stack.push((left, start, start + mid, depth + 1));
        }
        tree
    }

    fn mean_target(&self, rows: &[usize]) -> [f64; 4] {
        let mut acc = [0.0; 4];
        for &r in rows {
            for k in 0..4 {
                acc[k] += self.y[r][k];
            }
        }
        acc.map(|a| a / rows.len() as f64)
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        let first = self.y[rows[0]];
        rows.iter().all(|&r| self.y[r] == first)
    }

    /// Tries the first `mtry` shuffled features; falls through to the rest
    /// only when none of those admits a valid split.
    fn best_split(&self, rows: &[usize], features: &[usize]) -> Option<Split> {
        let mut best: Option<Split> = None;
        let mut order: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
        for (tried, &f) in features.iter().enumerate() {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            order.clear();
            order.extend(rows.iter().map(|&r| (self.x[r][f], r)));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            if order[0].0 == order[order.len() - 1].0 {
                continue;
            }
            let mut total = [0.0; 4];
            for &(_, r) in order.iter() {
                for k in 0..4 {
                    total[k] += self.scaled[r][k];
                }
            }
            let n = order.len();
            let mut left = [0.0; 4];
            for i in 1..n {
                let r = order[i - 1].1;
                for k in 0..4 {
                    left[k] += self.scaled[r][k];
                }
                if i < self.min_leaf || n - i < self.min_leaf || order[i - 1].0 == order[i].0 {
                    continue;
                }
                let (nl, nr) = (i as f64, (n - i) as f64);
                let score: f64 = (0..4)
                    .map(|k| left[k] * left[k] / nl + (total[k] - left[k]).powi(2) / nr)
                    .sum();
                if best.as_ref().is_none_or(|b| score > b.score) {
                    let (a, b) = (order[i - 1].0, order[i].0);
                    let mid = 0.5 * (a + b);
                    let threshold = if mid < b { mid } else { a };
                    best = Some(Split {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }
}

/// Moves rows satisfying `pred` to the front; returns how many did.
fn partition<F: Fn(&usize) -> bool>(rows: &mut [usize], pred: F) -> usize {
    let mut mid = 0;
    for i in 0..rows.len() {
        if pred(&rows[i]) {
            rows.swap(i, mid);
            mid += 1;
        }
    }
    mid
}
