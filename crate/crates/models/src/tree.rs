//! Gradient-boosted regression trees on a single scalar feature.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::spec::TreeParams;

pub const MIN_TREE_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf(f64),
    Split { threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, x: f64) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf(v) => return v,
                TreeNode::Split { threshold, left, right } => i = if x <= threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub base: f64,
    pub trees: Vec<Tree>,
}

impl TreeEnsemble {
    /// Fits squared-error boosting. Deterministic for a given `seed`.
    pub fn fit(x: &[f64], y: &[f64], params: &TreeParams, seed: u64) -> Result<Self> {
        params.validate()?;
        if x.len() != y.len() {
            return Err(ModelError::input(format!("{} features vs {} targets", x.len(), y.len())));
        }
        if x.len() < MIN_TREE_SAMPLES {
            return Err(ModelError::input(format!(
                "tree ensemble needs at least {MIN_TREE_SAMPLES} training pairs, got {}",
                x.len()
            )));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(ModelError::input("non-finite training pair"));
        }
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
        let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
        let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();

        let base = ys.iter().sum::<f64>() / ys.len() as f64;
        let mut pred = vec![base; ys.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trees = Vec::with_capacity(params.trees);
        for _ in 0..params.trees {
            let rows: Vec<usize> = (0..xs.len())
                .filter(|_| params.subsample >= 1.0 || rng.random::<f64>() < params.subsample)
                .collect();
            if rows.len() < 2 * params.min_leaf {
                continue;
            }
            let fx: Vec<f64> = rows.iter().map(|&i| xs[i]).collect();
            let fr: Vec<f64> = rows.iter().map(|&i| ys[i] - pred[i]).collect();
            let mut tree = Tree { nodes: Vec::new() };
            grow(&mut tree, &fx, &fr, params, params.depth);
            if tree.nodes.len() == 1 {
                // a lone leaf only adds subsampling noise
                continue;
            }
            for (p, &xv) in pred.iter_mut().zip(&xs) {
                *p += params.learning_rate * tree.predict(xv);
            }
            for node in &mut tree.nodes {
                if let TreeNode::Leaf(v) = node {
                    *v *= params.learning_rate;
                }
            }
            trees.push(tree);
        }
        Ok(Self { base, trees })
    }

    pub fn predict(&self, x: f64) -> f64 {
        self.base + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

/// Grows a subtree over feature-sorted rows and returns its node index.
fn grow(tree: &mut Tree, x: &[f64], r: &[f64], params: &TreeParams, depth: usize) -> usize {
    let n = x.len();
    let total: f64 = r.iter().sum();
    let idx = tree.nodes.len();
    tree.nodes.push(TreeNode::Leaf(total / n as f64));
    if depth == 0 || n < 2 * params.min_leaf {
        return idx;
    }
    let base_score = total * total / n as f64;
    let mut best: Option<(f64, usize)> = None;
    let mut left_sum = 0.0;
    for i in 1..n {
        left_sum += r[i - 1];
        if i < params.min_leaf || n - i < params.min_leaf || x[i - 1] == x[i] {
            continue;
        }
        let right_sum = total - left_sum;
        let score = left_sum * left_sum / i as f64 + right_sum * right_sum / (n - i) as f64;
        if score > base_score + 1e-12 && best.is_none_or(|(s, _)| score > s) {
            best = Some((score, i));
        }
    }
    let Some((_, cut)) = best else {
        return idx;
    };
    let threshold = 0.5 * (x[cut - 1] + x[cut]);
    let left = grow(tree, &x[..cut], &r[..cut], params, depth - 1);
    let right = grow(tree, &x[cut..], &r[cut..], params, depth - 1);
    tree.nodes[idx] = TreeNode::Split { threshold, left, right };
    idx
}
