use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::argmax;
use crate::posture::{N_CLASSES, N_SENSORS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for DtParams {
    fn default() -> Self {
        Self { max_depth: 16, min_leaf: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features drawn per split.
    pub feature_subsample: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for RfParams {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: 12, min_leaf: 1, feature_subsample: 3, bootstrap: true, seed: 0 }
    }
}

/// Nodes are stored in pre-order; a split's left child follows it directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Split { feature: u8, threshold: f64, left: u32, right: u32 },
    /// Majority class and its share of the training rows that reached it.
    Leaf { class: u8, confidence: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

struct Builder<'a> {
    x: &'a [[f64; N_SENSORS]],
    y: &'a [usize],
    max_depth: usize,
    min_leaf: usize,
    max_features: usize,
    rng: Option<ChaCha8Rng>,
    nodes: Vec<Node>,
}

fn class_counts(y: &[usize], idx: &[usize]) -> [usize; N_CLASSES] {
    let mut c = [0; N_CLASSES];
    for &i in idx {
        c[y[i]] += 1;
    }
    c
}

fn sum_sq_over_n(c: &[usize; N_CLASSES], n: usize) -> f64 {
    c.iter().map(|&k| (k * k) as f64).sum::<f64>() / n as f64
}

impl Builder<'_> {
    fn leaf(&mut self, counts: &[usize; N_CLASSES], n: usize) -> u32 {
        let scores = counts.map(|c| c as f64);
        let class = argmax(&scores);
        self.nodes.push(Node::Leaf { class: class as u8, confidence: counts[class] as f64 / n as f64 });
        (self.nodes.len() - 1) as u32
    }

    /// Best Gini split of `idx` on `feature`: `(score, threshold)` where a
    /// higher score means lower weighted impurity.
    fn best_on(&self, idx: &[usize], feature: usize, total: &[usize; N_CLASSES]) -> Option<(f64, f64)> {
        let mut pairs: Vec<(f64, usize)> = idx.iter().map(|&i| (self.x[i][feature], self.y[i])).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pairs.len();
        let mut left = [0usize; N_CLASSES];
        let mut best: Option<(f64, f64)> = None;
        for k in 0..n - 1 {
            left[pairs[k].1] += 1;
            let n_left = k + 1;
            if pairs[k].0 == pairs[k + 1].0 || n_left < self.min_leaf || n - n_left < self.min_leaf {
                continue;
            }
            let mut right = *total;
            for c in 0..N_CLASSES {
                right[c] -= left[c];
            }
            let score = sum_sq_over_n(&left, n_left) + sum_sq_over_n(&right, n - n_left);
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, (pairs[k].0 + pairs[k + 1].0) / 2.0));
            }
        }
        best
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> u32 {
        let n = idx.len();
        let counts = class_counts(self.y, &idx);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.max_depth || n < 2 * self.min_leaf {
            return self.leaf(&counts, n);
        }
        let mut features: Vec<usize> = (0..N_SENSORS).collect();
        if self.max_features < N_SENSORS {
            if let Some(rng) = self.rng.as_mut() {
                features.shuffle(rng);
            }
        }
        // Zero-gain splits are accepted: XOR-like layouts need them. If the
        // drawn features are all constant here, keep drawing.
        let mut best: Option<(f64, usize, f64)> = None;
        for (k, &f) in features.iter().enumerate() {
            if k >= self.max_features && best.is_some() {
                break;
            }
            if let Some((score, thr)) = self.best_on(&idx, f, &counts) {
                if best.is_none_or(|(s, _, _)| score > s) {
                    best = Some((score, f, thr));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return self.leaf(&counts, n);
        };
        let (li, ri): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { class: 0, confidence: 0.0 });
        let left = self.build(li, depth + 1);
        let right = self.build(ri, depth + 1);
        self.nodes[at] = Node::Split { feature: feature as u8, threshold, left, right };
        at as u32
    }
}

impl Tree {
    /// Grows a tree on the rows listed in `idx` (repeats allowed). With an
    /// `rng`, each split considers `max_features` randomly drawn features.
    pub fn fit(
        x: &[[f64; N_SENSORS]],
        y: &[usize],
        idx: Vec<usize>,
        max_depth: usize,
        min_leaf: usize,
        feature_draw: Option<(usize, ChaCha8Rng)>,
    ) -> Self {
        let (max_features, rng) = match feature_draw {
            Some((m, rng)) => (m.clamp(1, N_SENSORS), Some(rng)),
            None => (N_SENSORS, None),
        };
        let mut b = Builder { x, y, max_depth, min_leaf: min_leaf.max(1), max_features, rng, nodes: Vec::new() };
        b.build(idx, 0);
        Tree { nodes: b.nodes }
    }

    pub fn leaf(&self, x: &[f64; N_SENSORS]) -> (usize, f64) {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                Node::Split { feature, threshold, left, right } => {
                    at = if x[feature as usize] <= threshold { left as usize } else { right as usize };
                }
                Node::Leaf { class, confidence } => return (class as usize, confidence),
            }
        }
    }

    pub fn n_splits(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, at: usize) -> usize {
            match t.nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(t, left as usize).max(walk(t, right as usize)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(self, 0)
    }
}

pub fn fit_tree(x: &[[f64; N_SENSORS]], y: &[usize], p: &DtParams) -> Tree {
    Tree::fit(x, y, (0..x.len()).collect(), p.max_depth, p.min_leaf, None)
}

/// Each tree draws from its own ChaCha stream of `seed`, so the forest does
/// not depend on thread scheduling.
pub fn fit_forest(x: &[[f64; N_SENSORS]], y: &[usize], p: &RfParams) -> Vec<Tree> {
    let n = x.len();
    (0..p.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
            rng.set_stream(t as u64);
            let idx = if p.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
            Tree::fit(x, y, idx, p.max_depth, p.min_leaf, Some((p.feature_subsample, rng)))
        })
        .collect()
}

/// Vote counts per class.
pub fn forest_votes(trees: &[Tree], x: &[f64; N_SENSORS]) -> [f64; N_CLASSES] {
    let mut votes = [0.0; N_CLASSES];
    for t in trees {
        votes[t.leaf(x).0] += 1.0;
    }
    votes
}
