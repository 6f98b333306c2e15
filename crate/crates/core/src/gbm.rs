//! Stage-wise boosted regression trees under logistic loss.
//!
//! Each round fits one depth-limited tree to the gradient and hessian of the
//! logistic loss at the current margins, searching splits exactly over the
//! sorted values of every feature. Leaf values are Newton steps with L2
//! smoothing, shrunk by the learning rate. Node covers count the training
//! rows that reach each node and are what path-dependent attribution uses to
//! weight branches.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::DesignMatrix;
use crate::error::{Error, Result};
use crate::math::sigmoid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        cover: f64,
    },
    Leaf {
        value: f64,
        cover: f64,
    },
}

impl TreeNode {
    pub fn cover(&self) -> f64 {
        match self {
            TreeNode::Split { cover, .. } | TreeNode::Leaf { cover, .. } => *cover,
        }
    }
}

/// A binary tree stored as a node arena with the root at index 0. Children
/// always sit at larger indices than their parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn new(nodes: Vec<TreeNode>) -> Result<Self> {
        let tree = Tree { nodes };
        tree.validate(usize::MAX)?;
        Ok(tree)
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    fn validate(&self, feature_count: usize) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::CorruptModel("tree without nodes".into()));
        }
        let mut parents = vec![0usize; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            let cover = node.cover();
            if !(cover > 0.0 && cover.is_finite()) {
                return Err(Error::CorruptModel(format!("node {i} has cover {cover}")));
            }
            match *node {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    cover,
                } => {
                    if feature >= feature_count {
                        return Err(Error::CorruptModel(format!(
                            "node {i} splits on feature {feature} of {feature_count}"
                        )));
                    }
                    if !threshold.is_finite() {
                        return Err(Error::CorruptModel(format!("node {i} threshold")));
                    }
                    for c in [left, right] {
                        if c <= i || c >= self.nodes.len() {
                            return Err(Error::CorruptModel(format!(
                                "node {i} has invalid child {c}"
                            )));
                        }
                        parents[c] += 1;
                    }
                    let sum = self.nodes[left].cover() + self.nodes[right].cover();
                    if (sum - cover).abs() > 1e-9 * cover {
                        return Err(Error::CorruptModel(format!(
                            "node {i} cover {cover} != children {sum}"
                        )));
                    }
                }
                TreeNode::Leaf { value, .. } => {
                    if !value.is_finite() {
                        return Err(Error::CorruptModel(format!("node {i} leaf value")));
                    }
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return Err(Error::CorruptModel("nodes do not form a tree".into()));
        }
        Ok(())
    }

    /// Leaf value reached by `x`; a row goes left iff its value is below the threshold.
    pub fn predict_row(&self, x: ArrayView1<f64>) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[feature] < threshold { left } else { right },
                TreeNode::Leaf { value, .. } => return value,
            }
        }
    }

    /// Cover-weighted mean leaf value.
    pub fn expected_value(&self) -> f64 {
        let root = self.nodes[0].cover();
        self.nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Leaf { value, cover } => Some(value * cover / root),
                _ => None,
            })
            .sum()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub trees: Vec<Tree>,
    pub base_margin: f64,
    pub learning_rate: f64,
    pub feature_count: usize,
}

impl TreeEnsemble {
    pub fn validate(&self) -> Result<()> {
        if !self.base_margin.is_finite() {
            return Err(Error::CorruptModel("base margin is not finite".into()));
        }
        for t in &self.trees {
            t.validate(self.feature_count)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: TreeEnsemble = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    /// The first `k` trees of this ensemble.
    pub fn truncated(&self, k: usize) -> TreeEnsemble {
        TreeEnsemble {
            trees: self.trees[..k.min(self.trees.len())].to_vec(),
            ..self.clone()
        }
    }

    /// Features used by at least one split.
    pub fn used_features(&self) -> Vec<bool> {
        let mut used = vec![false; self.feature_count];
        for t in &self.trees {
            for n in t.nodes() {
                if let TreeNode::Split { feature, .. } = n {
                    used[*feature] = true;
                }
            }
        }
        used
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub l2_leaf: f64,
    /// Carried for reproducibility records; exact greedy training draws no
    /// random numbers.
    pub seed: u64,
}

impl Default for GbmConfig {
    fn default() -> Self {
        GbmConfig {
            n_trees: 50,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 5,
            l2_leaf: 1.0,
            seed: 0,
        }
    }
}

impl GbmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.max_depth == 0 {
            return Err(Error::InvalidArgument(
                "n_trees and max_depth must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if !(self.l2_leaf >= 0.0) {
            return Err(Error::InvalidArgument("l2_leaf must be >= 0".into()));
        }
        Ok(())
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct TreeBuilder<'a> {
    /// Column-major copy of the training matrix.
    cols: &'a [Vec<f64>],
    grad: &'a [f64],
    hess: &'a [f64],
    config: &'a GbmConfig,
    nodes: Vec<TreeNode>,
    goes_left: Vec<bool>,
}

impl TreeBuilder<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.config.l2_leaf)
    }

    /// `sorted[f]` lists the node's rows in ascending order of feature `f`.
    fn best_split(&self, sorted: &[Vec<usize>], g: f64, h: f64) -> Option<Split> {
        let min_leaf = self.config.min_samples_leaf.max(1);
        let n = sorted[0].len();
        if n < 2 * min_leaf {
            return None;
        }
        let parent = self.score(g, h);
        let mut best: Option<Split> = None;
        for (f, order) in sorted.iter().enumerate() {
            let col = &self.cols[f];
            let (mut gl, mut hl) = (0.0, 0.0);
            for i in 1..n {
                gl += self.grad[order[i - 1]];
                hl += self.hess[order[i - 1]];
                if i < min_leaf || n - i < min_leaf {
                    continue;
                }
                let (lo, hi) = (col[order[i - 1]], col[order[i]]);
                if lo >= hi {
                    continue;
                }
                let gain = 0.5 * (self.score(gl, hl) + self.score(g - gl, h - hl) - parent);
                // strict comparison keeps the lowest feature, then the lowest threshold
                if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = 0.5 * (lo + hi);
                    if threshold <= lo {
                        threshold = hi;
                    }
                    best = Some(Split {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, sorted: Vec<Vec<usize>>, depth: usize) -> usize {
        let idx = self.nodes.len();
        let rows = &sorted[0];
        let cover = rows.len() as f64;
        self.nodes.push(TreeNode::Leaf { value: 0.0, cover });
        let g: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        let h: f64 = rows.iter().map(|&r| self.hess[r]).sum();
        if depth < self.config.max_depth {
            if let Some(split) = self.best_split(&sorted, g, h) {
                let col = &self.cols[split.feature];
                for &i in rows {
                    self.goes_left[i] = col[i] < split.threshold;
                }
                let (l, r): (Vec<Vec<usize>>, Vec<Vec<usize>>) = sorted
                    .into_iter()
                    .map(|order| order.into_iter().partition(|&i| self.goes_left[i]))
                    .unzip();
                let left = self.build(l, depth + 1);
                let right = self.build(r, depth + 1);
                self.nodes[idx] = TreeNode::Split {
                    feature: split.feature,
                    threshold: split.threshold,
                    left,
                    right,
                    cover,
                };
                return idx;
            }
        }
        self.nodes[idx] = TreeNode::Leaf {
            value: -g / (h + self.config.l2_leaf) * self.config.learning_rate,
            cover,
        };
        idx
    }
}

pub fn train_gbm(data: &DesignMatrix, config: &GbmConfig) -> Result<TreeEnsemble> {
    config.validate()?;
    let x = data.values.view();
    let y = &data.labels;
    let n = x.nrows();
    if n == 0 || x.ncols() == 0 {
        return Err(Error::EmptyData);
    }
    let prior = (y.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64).clamp(1e-6, 1.0 - 1e-6);
    let base_margin = (prior / (1.0 - prior)).ln();

    let cols: Vec<Vec<f64>> = x.columns().into_iter().map(|c| c.to_vec()).collect();
    // ties keep row order, so the split search is independent of input layout
    let presorted: Vec<Vec<usize>> = cols
        .iter()
        .map(|c| {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| c[a].total_cmp(&c[b]));
            order
        })
        .collect();

    let mut margins = vec![base_margin; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(config.n_trees);
    for _ in 0..config.n_trees {
        for i in 0..n {
            let p = sigmoid(margins[i]);
            grad[i] = p - f64::from(y[i]);
            hess[i] = p * (1.0 - p);
        }
        let mut builder = TreeBuilder {
            cols: &cols,
            grad: &grad,
            hess: &hess,
            config,
            nodes: Vec::new(),
            goes_left: vec![false; n],
        };
        builder.build(presorted.clone(), 0);
        let tree = Tree {
            nodes: builder.nodes,
        };
        for (i, m) in margins.iter_mut().enumerate() {
            *m += tree.predict_row(x.row(i));
        }
        trees.push(tree);
    }
    Ok(TreeEnsemble {
        trees,
        base_margin,
        learning_rate: config.learning_rate,
        feature_count: x.ncols(),
    })
}

fn check_columns(model: &TreeEnsemble, x: &ArrayView2<f64>) -> Result<()> {
    if x.ncols() != model.feature_count {
        return Err(Error::DimensionMismatch(format!(
            "model expects {} columns, got {}",
            model.feature_count,
            x.ncols()
        )));
    }
    Ok(())
}

pub fn predict_margin(model: &TreeEnsemble, x: ArrayView2<f64>) -> Result<Array1<f64>> {
    check_columns(model, &x)?;
    Ok(x.rows()
        .into_iter()
        .map(|row| model.base_margin + model.trees.iter().map(|t| t.predict_row(row)).sum::<f64>())
        .collect())
}

pub fn predict_proba(model: &TreeEnsemble, x: ArrayView2<f64>) -> Result<Array1<f64>> {
    Ok(predict_margin(model, x)?.mapv(sigmoid))
}

#[cfg(test)]
mod tests {
    use ndarray::{array, Array2};
    use rand::Rng;

    use super::*;
    use crate::math::logistic_nll;
    use crate::seed;

    fn design(x: Array2<f64>, y: Vec<u8>) -> DesignMatrix {
        let names = (0..x.ncols()).map(|j| format!("x{j}")).collect();
        DesignMatrix::new(x, names, y).unwrap()
    }

    fn stump(left: f64, right: f64) -> TreeEnsemble {
        TreeEnsemble {
            trees: vec![Tree::new(vec![
                TreeNode::Split {
                    feature: 0,
                    threshold: 0.0,
                    left: 1,
                    right: 2,
                    cover: 4.0,
                },
                TreeNode::Leaf {
                    value: left,
                    cover: 2.0,
                },
                TreeNode::Leaf {
                    value: right,
                    cover: 2.0,
                },
            ])
            .unwrap()],
            base_margin: 0.0,
            learning_rate: 1.0,
            feature_count: 2,
        }
    }

    fn random_data(seed: u64, n: usize, p: usize) -> DesignMatrix {
        let mut rng = seed::rng(seed);
        let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-2.0..2.0));
        let y = x
            .rows()
            .into_iter()
            .map(|r| u8::from(r[0] + 0.5 * r[1 % p] + rng.random_range(-1.0..1.0) > 0.0))
            .collect();
        design(x, y)
    }

    fn check_covers(model: &TreeEnsemble) {
        for t in &model.trees {
            for n in t.nodes() {
                assert!(n.cover() > 0.0);
                if let TreeNode::Split {
                    left, right, cover, ..
                } = n
                {
                    assert_eq!(*cover, t.nodes()[*left].cover() + t.nodes()[*right].cover());
                }
            }
        }
    }

    #[test]
    fn single_class_labels() {
        let d = design(array![[1.0], [2.0], [3.0], [4.0]], vec![1, 1, 1, 1]);
        let cfg = GbmConfig {
            n_trees: 1,
            ..GbmConfig::default()
        };
        let model = train_gbm(&d, &cfg).unwrap();
        let p = predict_proba(&model, d.values.view()).unwrap();
        assert!(p.iter().all(|&v| v >= 0.99));
    }

    #[test]
    fn separable_stumps_reach_full_accuracy() {
        let xs: Vec<f64> = (-10..10).map(|i| i as f64 + 0.5).collect();
        let y: Vec<u8> = xs.iter().map(|&v| u8::from(v >= 0.0)).collect();
        let d = design(Array2::from_shape_vec((20, 1), xs).unwrap(), y.clone());
        let cfg = GbmConfig {
            n_trees: 10,
            max_depth: 1,
            ..GbmConfig::default()
        };
        let model = train_gbm(&d, &cfg).unwrap();
        let p = predict_proba(&model, d.values.view()).unwrap();
        let correct = p.iter().zip(&y).filter(|(p, &y)| u8::from(**p >= 0.5) == y).count();
        assert_eq!(correct, 20);
        assert!(model.trees.iter().all(|t| t.depth() == 1));
    }

    #[test]
    fn boosting_loss_is_non_increasing() {
        for s in 0..20 {
            let d = random_data(s, 120, 4);
            let model = train_gbm(&d, &GbmConfig::default()).unwrap();
            check_covers(&model);
            let mut last = f64::INFINITY;
            for k in 0..=model.trees.len() {
                let m = predict_margin(&model.truncated(k), d.values.view()).unwrap();
                let loss: f64 = m.iter().zip(&d.labels).map(|(&z, &y)| logistic_nll(z, y)).sum::<f64>()
                    / d.n_rows() as f64;
                assert!(loss <= last + 1e-12, "seed {s} round {k}: {loss} > {last}");
                last = loss;
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let d = random_data(3, 80, 3);
        let a = train_gbm(&d, &GbmConfig::default()).unwrap();
        let b = train_gbm(&d, &GbmConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn routing_and_empty_ensembles() {
        let x = array![[-1.0, 5.0], [1.0, 5.0], [0.0, -3.0]];
        let m = predict_margin(&stump(-1.0, 1.0), x.view()).unwrap();
        assert_eq!(m.to_vec(), vec![-1.0, 1.0, 1.0]);
        // column 1 is never split on
        let x2 = array![[-1.0, -100.0], [1.0, 100.0], [0.0, 0.0]];
        assert_eq!(predict_margin(&stump(-1.0, 1.0), x2.view()).unwrap(), m);

        let empty = TreeEnsemble {
            trees: vec![],
            base_margin: 0.7,
            learning_rate: 0.1,
            feature_count: 2,
        };
        assert!(predict_margin(&empty, x.view()).unwrap().iter().all(|&v| v == 0.7));
        assert!(predict_margin(&empty, array![[1.0]].view()).is_err());
    }

    #[test]
    fn probabilities() {
        let mut e = stump(0.0, 3f64.ln());
        e.base_margin = 0.0;
        let p = predict_proba(&e, array![[-1.0, 0.0], [1.0, 0.0]].view()).unwrap();
        assert_eq!(p[0], 0.5);
        assert!((p[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip_and_corruption() {
        let model = train_gbm(&random_data(1, 60, 3), &GbmConfig::default()).unwrap();
        let back = TreeEnsemble::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(model, back);

        let mut bad = stump(1.0, 2.0);
        bad.trees[0].nodes[1] = TreeNode::Leaf {
            value: 1.0,
            cover: 0.0,
        };
        let text = serde_json::to_string(&bad).unwrap();
        assert!(matches!(TreeEnsemble::from_json(&text), Err(Error::CorruptModel(_))));
    }
}
