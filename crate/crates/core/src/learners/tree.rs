//! CART decision tree with Gini impurity.
//!
//! Candidate thresholds are midpoints between consecutive distinct feature
//! values present at a node. Among equally good splits the lowest feature
//! index wins, then the lowest threshold. A node is split whenever it is
//! impure, deep enough and large enough, even when the best split does not
//! lower the impurity; this lets a tree of unlimited depth separate any
//! data set without duplicate rows.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{predict_from_score, Classifier, TrainSet};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: Some(20),
            min_samples_split: 2,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == Some(0) {
            return Err(Error::Argument("tree max_depth must be positive".to_owned()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::Argument("tree min_samples_split must be at least 2".to_owned()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Node {
    /// Positive fraction of the training samples reaching the leaf.
    Leaf { value: f64 },
    /// `x[feature] < threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    feature_dim: usize,
}

impl DecisionTree {
    pub fn fit(train: &TrainSet, params: &TreeParams) -> Result<Self> {
        params.validate()?;
        let data = BinnedData::new(train);
        let samples: Vec<u32> = (0..train.len() as u32).collect();
        // Unused without feature subsampling.
        let mut rng = crate::seed::rng(0);
        Ok(grow(&data, samples, params, None, &mut rng))
    }

    /// Leaf value (positive fraction) for `x`.
    pub fn leaf_value(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] < *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        predict_from_score(self.leaf_value(x))
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

impl Classifier for DecisionTree {
    fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        self.leaf_value(x)
    }
}

/// Column-major view of a training set with every value replaced by its
/// rank among the distinct values of its column.
pub(crate) struct BinnedData {
    n_features: usize,
    /// `bins[f][i]`: rank of row `i`'s value in `uniq[f]`.
    bins: Vec<Vec<u32>>,
    uniq: Vec<Vec<f64>>,
    targets: Vec<bool>,
}

impl BinnedData {
    pub(crate) fn new(train: &TrainSet) -> Self {
        let n = train.len();
        let d = train.n_features();
        let mut bins = Vec::with_capacity(d);
        let mut uniq = Vec::with_capacity(d);
        let mut column: Vec<f64> = Vec::with_capacity(n);
        for f in 0..d {
            column.clear();
            column.extend(train.rows().map(|r| r[f]));
            let mut values = column.clone();
            values.sort_by(f64::total_cmp);
            values.dedup();
            let col_bins = column
                .iter()
                .map(|v| values.partition_point(|u| u < v) as u32)
                .collect();
            bins.push(col_bins);
            uniq.push(values);
        }
        Self {
            n_features: d,
            bins,
            uniq,
            targets: train.targets().to_vec(),
        }
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    feature: usize,
    /// Highest bin sent left.
    split_bin: u32,
    threshold: f64,
    /// Sum over children of (class count)^2 / child size; larger is purer.
    score: f64,
}

impl Candidate {
    fn beats(&self, other: &Option<Candidate>) -> bool {
        match other {
            None => true,
            Some(o) => {
                self.score > o.score
                    || (self.score == o.score
                        && (self.feature < o.feature
                            || (self.feature == o.feature && self.threshold < o.threshold)))
            }
        }
    }
}

struct Scratch {
    pos: Vec<u32>,
    neg: Vec<u32>,
    sorted: Vec<(u32, bool)>,
}

/// Best split of `samples` on feature `f`, or `None` if the feature is
/// constant on the node.
fn best_split_on(data: &BinnedData, samples: &[u32], f: usize, scratch: &mut Scratch) -> Option<Candidate> {
    let col = &data.bins[f];
    let uniq = &data.uniq[f];
    let m = samples.len();
    let total_pos = samples.iter().filter(|&&i| data.targets[i as usize]).count() as f64;
    let total = m as f64;
    let mut best: Option<Candidate> = None;
    let consider = |left_pos: f64, left_n: f64, lo: u32, hi: u32, best: &mut Option<Candidate>| {
        let right_pos = total_pos - left_pos;
        let right_n = total - left_n;
        let left_neg = left_n - left_pos;
        let right_neg = right_n - right_pos;
        let score = (left_pos * left_pos + left_neg * left_neg) / left_n
            + (right_pos * right_pos + right_neg * right_neg) / right_n;
        let cand = Candidate {
            feature: f,
            split_bin: lo,
            threshold: (uniq[lo as usize] + uniq[hi as usize]) / 2.0,
            score,
        };
        // Within one feature thresholds are visited in increasing order, so a
        // strict improvement test keeps the lowest threshold on ties.
        if best.is_none_or(|b| score > b.score) {
            *best = Some(cand);
        }
    };

    if uniq.len() <= 2 * m {
        let nb = uniq.len();
        scratch.pos.clear();
        scratch.pos.resize(nb, 0);
        scratch.neg.clear();
        scratch.neg.resize(nb, 0);
        for &i in samples {
            let b = col[i as usize] as usize;
            if data.targets[i as usize] {
                scratch.pos[b] += 1;
            } else {
                scratch.neg[b] += 1;
            }
        }
        let mut prev: Option<u32> = None;
        let (mut left_pos, mut left_n) = (0.0, 0.0);
        for b in 0..nb {
            let (p, q) = (scratch.pos[b], scratch.neg[b]);
            if p + q == 0 {
                continue;
            }
            if let Some(pb) = prev {
                consider(left_pos, left_n, pb, b as u32, &mut best);
            }
            left_pos += f64::from(p);
            left_n += f64::from(p + q);
            prev = Some(b as u32);
        }
    } else {
        scratch.sorted.clear();
        scratch
            .sorted
            .extend(samples.iter().map(|&i| (col[i as usize], data.targets[i as usize])));
        scratch.sorted.sort_unstable_by_key(|&(b, _)| b);
        let (mut left_pos, mut left_n) = (0.0, 0.0);
        let sorted = &scratch.sorted;
        for k in 0..sorted.len() {
            let (b, y) = sorted[k];
            if k > 0 && sorted[k - 1].0 != b {
                consider(left_pos, left_n, sorted[k - 1].0, b, &mut best);
            }
            left_pos += f64::from(u8::from(y));
            left_n += 1.0;
        }
    }
    best
}

/// Grows a tree over `samples` (row indices, possibly repeated).
///
/// With `max_features = Some(k)`, each node examines features in a random
/// order and stops once `k` non-constant features have been evaluated, or
/// continues past `k` until some usable split is found.
pub(crate) fn grow<R: Rng>(
    data: &BinnedData,
    mut samples: Vec<u32>,
    params: &TreeParams,
    max_features: Option<usize>,
    rng: &mut R,
) -> DecisionTree {
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut scratch = Scratch {
        pos: Vec::new(),
        neg: Vec::new(),
        sorted: Vec::new(),
    };
    let mut features: Vec<usize> = (0..data.n_features).collect();
    // (node slot, sample range, depth)
    let mut stack = vec![(0usize, 0usize, samples.len(), 0usize)];
    while let Some((slot, start, end, depth)) = stack.pop() {
        let node_samples = &mut samples[start..end];
        let m = node_samples.len();
        let pos = node_samples.iter().filter(|&&i| data.targets[i as usize]).count();
        let value = if m == 0 { 0.0 } else { pos as f64 / m as f64 };
        let can_split = pos != 0
            && pos != m
            && m >= params.min_samples_split
            && params.max_depth.is_none_or(|d| depth < d);
        let mut best: Option<Candidate> = None;
        if can_split {
            match max_features {
                None => {
                    for f in 0..data.n_features {
                        if let Some(c) = best_split_on(data, node_samples, f, &mut scratch) {
                            if c.beats(&best) {
                                best = Some(c);
                            }
                        }
                    }
                }
                Some(k) => {
                    features.shuffle(rng);
                    let mut evaluated = 0;
                    for &f in &features {
                        if evaluated >= k && best.is_some() {
                            break;
                        }
                        if let Some(c) = best_split_on(data, node_samples, f, &mut scratch) {
                            evaluated += 1;
                            if c.beats(&best) {
                                best = Some(c);
                            }
                        }
                    }
                }
            }
        }
        match best {
            None => nodes[slot] = Node::Leaf { value },
            Some(c) => {
                let col = &data.bins[c.feature];
                let mut mid = 0;
                for k in 0..m {
                    if col[node_samples[k] as usize] <= c.split_bin {
                        node_samples.swap(k, mid);
                        mid += 1;
                    }
                }
                let left = nodes.len();
                let right = left + 1;
                nodes.push(Node::Leaf { value: 0.0 });
                nodes.push(Node::Leaf { value: 0.0 });
                nodes[slot] = Node::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left,
                    right,
                };
                stack.push((right, start + mid, end, depth + 1));
                stack.push((left, start, start + mid, depth + 1));
            }
        }
    }
    DecisionTree {
        nodes,
        feature_dim: data.n_features,
    }
}
