//! CART regression trees with minimum leaf size and cost-complexity pruning.
//!
//! Splits are exhaustive over midpoints between consecutive distinct feature
//! values. A feature value equal to the threshold goes left.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf_id: usize,
        value: f64,
        count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    n_features: usize,
    n_leaves: usize,
    min_samples_leaf: usize,
    ccp_alpha: f64,
}

/// The best split of one node, as found by the exhaustive search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    /// Number of samples sent left.
    pub left_count: usize,
    pub sse: f64,
}

struct Grown {
    sse: f64,
    mean: f64,
    count: usize,
    children: Option<(usize, f64, Box<Grown>, Box<Grown>)>,
}

impl Grown {
    fn leaves(&self) -> usize {
        match &self.children {
            None => 1,
            Some((_, _, l, r)) => l.leaves() + r.leaves(),
        }
    }

    fn subtree_sse(&self) -> f64 {
        match &self.children {
            None => self.sse,
            Some((_, _, l, r)) => l.subtree_sse() + r.subtree_sse(),
        }
    }

    /// Smallest effective alpha among internal nodes, with the path to it.
    fn weakest_link(&self, total: f64, path: &mut Vec<bool>) -> Option<(f64, Vec<bool>)> {
        let (_, _, l, r) = self.children.as_ref()?;
        let own = (self.sse - self.subtree_sse()) / total / (self.leaves() - 1) as f64;
        let mut best = (own, path.clone());
        for (dir, child) in [(false, l), (true, r)] {
            path.push(dir);
            if let Some(c) = child.weakest_link(total, path) {
                if c.0 < best.0 {
                    best = c;
                }
            }
            path.pop();
        }
        Some(best)
    }

    fn collapse(&mut self, path: &[bool]) {
        match path.split_first() {
            None => self.children = None,
            Some((&dir, rest)) => {
                let (_, _, l, r) = self.children.as_mut().expect("path follows internal nodes");
                if dir { r.collapse(rest) } else { l.collapse(rest) }
            }
        }
    }
}

fn sse_of(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    let mean = sum / n as f64;
    (values.map(|v| (v - mean) * (v - mean)).sum(), mean)
}

/// Exhaustive search for the SSE-minimizing split of `idx`. Ties, up to a
/// relative rounding tolerance, keep the lowest feature index, then the
/// leftmost position.
pub fn best_split(
    features: ArrayView2<f64>,
    targets: &[f64],
    idx: &[usize],
    min_samples_leaf: usize,
) -> Option<SplitChoice> {
    let n = idx.len();
    if n < 2 * min_samples_leaf.max(1) {
        return None;
    }
    let mean = idx.iter().map(|&i| targets[i]).sum::<f64>() / n as f64;
    let mut best: Option<SplitChoice> = None;
    let mut order = idx.to_vec();
    let mut prefix = vec![(0.0, 0.0); n + 1];
    for f in 0..features.ncols() {
        order.sort_by(|&a, &b| features[(a, f)].total_cmp(&features[(b, f)]).then(a.cmp(&b)));
        for (p, &i) in order.iter().enumerate() {
            let v = targets[i] - mean;
            prefix[p + 1] = (prefix[p].0 + v, prefix[p].1 + v * v);
        }
        let (ts, tq) = prefix[n];
        let tol = 1e-10 * tq;
        for p in min_samples_leaf.max(1)..=(n - min_samples_leaf.max(1)) {
            let (a, b) = (features[(order[p - 1], f)], features[(order[p], f)]);
            if !(a < b) {
                continue;
            }
            let (ls, lq) = prefix[p];
            let (rs, rq) = (ts - ls, tq - lq);
            let sse = (lq - ls * ls / p as f64) + (rq - rs * rs / (n - p) as f64);
            if best.is_none_or(|bst| sse < bst.sse - tol) {
                let mid = a + (b - a) / 2.0;
                let threshold = if mid >= b { a } else { mid };
                best = Some(SplitChoice {
                    feature: f,
                    threshold,
                    left_count: p,
                    sse,
                });
            }
        }
    }
    best
}

impl RegressionTree {
    pub fn fit(
        features: ArrayView2<f64>,
        targets: &[f64],
        min_samples_leaf: usize,
        ccp_alpha: f64,
    ) -> Result<Self> {
        let n = targets.len();
        if n == 0 {
            return Err(Error::EmptyInput("tree training set"));
        }
        check_dim(n, features.nrows())?;
        if min_samples_leaf == 0 {
            return Err(Error::InvalidArgument("min_samples_leaf must be positive".into()));
        }
        if !(ccp_alpha >= 0.0) {
            return Err(Error::InvalidArgument("ccp_alpha must be nonnegative".into()));
        }
        if features.iter().chain(targets).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("tree inputs must be finite".into()));
        }
        let idx: Vec<usize> = (0..n).collect();
        let mut root = grow(features, targets, idx, min_samples_leaf);
        if ccp_alpha > 0.0 {
            while let Some((g, path)) = root.weakest_link(n as f64, &mut Vec::new()) {
                if g > ccp_alpha {
                    break;
                }
                root.collapse(&path);
            }
        }
        let mut nodes = Vec::new();
        let mut n_leaves = 0;
        flatten(&root, &mut nodes, &mut n_leaves);
        Ok(RegressionTree {
            nodes,
            n_features: features.ncols(),
            n_leaves,
            min_samples_leaf,
            ccp_alpha,
        })
    }

    /// A one-leaf tree over `n_features` features.
    pub fn single_leaf(n_features: usize, value: f64, count: usize) -> Self {
        RegressionTree {
            nodes: vec![Node::Leaf {
                leaf_id: 0,
                value,
                count,
            }],
            n_features,
            n_leaves: 1,
            min_samples_leaf: count.max(1),
            ccp_alpha: 0.0,
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn min_samples_leaf(&self) -> usize {
        self.min_samples_leaf
    }

    pub fn ccp_alpha(&self) -> f64 {
        self.ccp_alpha
    }

    pub fn leaf_of(&self, feature: &[f64]) -> Result<usize> {
        check_dim(self.n_features, feature.len())?;
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                Node::Leaf { leaf_id, .. } => return Ok(*leaf_id),
                Node::Split {
                    feature: f,
                    threshold,
                    left,
                    right,
                } => k = if feature[*f] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Training-sample counts per leaf id.
    pub fn leaf_counts(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_leaves];
        for node in &self.nodes {
            if let Node::Leaf { leaf_id, count, .. } = node {
                out[*leaf_id] = *count;
            }
        }
        out
    }
}

fn grow(features: ArrayView2<f64>, targets: &[f64], idx: Vec<usize>, min_leaf: usize) -> Grown {
    let (sse, mean) = sse_of(idx.iter().map(|&i| targets[i]));
    let count = idx.len();
    let first = targets[idx[0]];
    let constant = idx.iter().all(|&i| targets[i] == first);
    let split = if constant {
        None
    } else {
        best_split(features, targets, &idx, min_leaf).filter(|s| s.sse < sse * (1.0 - 1e-12))
    };
    let children = split.map(|s| {
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| features[(i, s.feature)] <= s.threshold);
        (
            s.feature,
            s.threshold,
            Box::new(grow(features, targets, l, min_leaf)),
            Box::new(grow(features, targets, r, min_leaf)),
        )
    });
    Grown {
        sse,
        mean,
        count,
        children,
    }
}

fn flatten(g: &Grown, nodes: &mut Vec<Node>, n_leaves: &mut usize) -> usize {
    let k = nodes.len();
    match &g.children {
        None => {
            nodes.push(Node::Leaf {
                leaf_id: *n_leaves,
                value: g.mean,
                count: g.count,
            });
            *n_leaves += 1;
        }
        Some((feature, threshold, l, r)) => {
            nodes.push(Node::Split {
                feature: *feature,
                threshold: *threshold,
                left: 0,
                right: 0,
            });
            let left = flatten(l, nodes, n_leaves);
            let right = flatten(r, nodes, n_leaves);
            nodes[k] = Node::Split {
                feature: *feature,
                threshold: *threshold,
                left,
                right,
            };
        }
    }
    k
}
