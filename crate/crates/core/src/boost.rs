//! Multi-class gradient-boosted regression trees with a regularized
//! second-order objective.
//!
//! Each round computes softmax probabilities from the current margins,
//! per-class gradients `g = p - onehot` and hessians `h = 2p(1-p)`, and grows
//! one tree per class by exact greedy split search. A leaf holding gradient
//! sum `G` and hessian sum `H` gets weight `-eta * G / (H + lambda)`; a split
//! is kept only when its gain, net of the per-leaf penalty `gamma`, is
//! positive.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng;

/// Lower bound applied to every per-row hessian.
pub const HESSIAN_FLOOR: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    /// Shrinkage applied to every leaf weight.
    pub eta: f64,
    /// Penalty per additional leaf.
    pub gamma: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    pub max_depth: usize,
    /// Fraction of rows drawn (without replacement) per round.
    pub subsample: f64,
    pub num_class: usize,
    pub num_rounds: usize,
    pub seed: u64,
}

impl BoostConfig {
    pub fn new(num_class: usize) -> Self {
        Self {
            eta: 0.7,
            gamma: 0.0,
            lambda: 1.0,
            max_depth: 6,
            subsample: 0.9,
            num_class,
            num_rounds: 100,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return bad(format!("eta must be > 0, got {}", self.eta));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return bad(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad(format!("subsample must lie in (0, 1], got {}", self.subsample));
        }
        if self.num_class == 0 {
            return bad("num_class must be positive".into());
        }
        Ok(())
    }

    fn tree_params(&self) -> TreeParams {
        TreeParams {
            eta: self.eta,
            gamma: self.gamma,
            lambda: self.lambda,
            max_depth: self.max_depth,
        }
    }
}

/// The subset of the boosting configuration a single tree needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub eta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub max_depth: usize,
}

// ---------------------------------------------------------------------------
// Objective pieces
// ---------------------------------------------------------------------------

pub fn softmax(margins: &[f64]) -> Vec<f64> {
    let max = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = margins.iter().map(|m| (m - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Per-class `(g, h)` of softmax cross-entropy.
pub fn grad_hess(probs: &[f64], label: usize) -> Vec<(f64, f64)> {
    probs
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let target = if k == label { 1.0 } else { 0.0 };
            (p - target, (2.0 * p * (1.0 - p)).max(HESSIAN_FLOOR))
        })
        .collect()
}

/// Optimal leaf output `-G / (H + lambda)` (before shrinkage).
pub fn leaf_weight(grad_sum: f64, hess_sum: f64, lambda: f64) -> Result<f64> {
    let denom = hess_sum + lambda;
    if denom <= 0.0 || denom.is_nan() {
        return Err(Error::DegenerateLeaf(denom));
    }
    Ok(-grad_sum / denom)
}

/// Objective reduction from splitting one leaf into two, minus `gamma`.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma
}

/// Mean multi-class cross-entropy of margin rows against labels.
pub fn cross_entropy(margins: &[Vec<f64>], labels: &[usize]) -> f64 {
    let total: f64 = margins
        .iter()
        .zip(labels)
        .map(|(m, &y)| {
            let max = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + m.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - m[y]
        })
        .sum();
    total / labels.len().max(1) as f64
}

// ---------------------------------------------------------------------------
// Trees
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        weight: f64,
    },
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn num_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.num_leaves() + right.num_leaves(),
        }
    }
}

/// Row-major feature matrix view.
#[derive(Debug, Clone, Copy)]
pub struct FeatureMatrix<'a> {
    data: &'a [f64],
    cols: usize,
}

impl<'a> FeatureMatrix<'a> {
    pub fn new(data: &'a [f64], cols: usize) -> Result<Self> {
        if cols == 0 || !data.len().is_multiple_of(cols) {
            return Err(Error::Dimension {
                expected: cols,
                got: data.len(),
            });
        }
        Ok(Self { data, cols })
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.cols
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// For every feature, all row indices ordered by value (ties by row index).
    fn presort(&self) -> Vec<Vec<usize>> {
        (0..self.cols)
            .map(|j| {
                let mut idx: Vec<usize> = (0..self.rows()).collect();
                idx.sort_by(|&a, &b| self.get(a, j).total_cmp(&self.get(b, j)).then(a.cmp(&b)));
                idx
            })
            .collect()
    }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Midpoint strictly below `hi`, so `lo <= t < hi` holds after rounding.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let t = lo + (hi - lo) / 2.0;
    if t >= hi {
        lo
    } else {
        t
    }
}

struct Grower<'a> {
    x: FeatureMatrix<'a>,
    grad: &'a [f64],
    hess: &'a [f64],
    params: TreeParams,
    /// Scratch: side of each row for the split being applied.
    goes_left: Vec<bool>,
}

impl Grower<'_> {
    fn leaf(&self, g: f64, h: f64) -> Result<TreeNode> {
        Ok(TreeNode::Leaf {
            weight: self.params.eta * leaf_weight(g, h, self.params.lambda)?,
        })
    }

    fn grow(&mut self, sorted: Vec<Vec<usize>>, depth: usize) -> Result<TreeNode> {
        let rows = &sorted[0];
        let g: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        let h: f64 = rows.iter().map(|&r| self.hess[r]).sum();
        if depth >= self.params.max_depth || rows.len() < 2 {
            return self.leaf(g, h);
        }

        let mut best: Option<BestSplit> = None;
        for (feature, order) in sorted.iter().enumerate() {
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                let r = order[k];
                gl += self.grad[r];
                hl += self.hess[r];
                let lo = self.x.get(r, feature);
                let hi = self.x.get(order[k + 1], feature);
                if lo >= hi {
                    continue;
                }
                let gain = split_gain(gl, hl, g - gl, h - hl, self.params.lambda, self.params.gamma);
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit {
                        feature,
                        threshold: midpoint(lo, hi),
                        gain,
                    });
                }
            }
        }

        let split = match best {
            Some(b) if b.gain > 0.0 => b,
            _ => return self.leaf(g, h),
        };

        for &r in &sorted[0] {
            self.goes_left[r] = self.x.get(r, split.feature) <= split.threshold;
        }
        let mut left_lists = Vec::with_capacity(sorted.len());
        let mut right_lists = Vec::with_capacity(sorted.len());
        for order in sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = order.into_iter().partition(|&r| self.goes_left[r]);
            left_lists.push(l);
            right_lists.push(r);
        }
        let left = self.grow(left_lists, depth + 1)?;
        let right = self.grow(right_lists, depth + 1)?;
        Ok(TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(left),
            right: Box::new(right),
        })
    }
}

/// Grow one tree on `rows` by exact greedy enumeration of split thresholds.
///
/// `grad` and `hess` are indexed by row of `x`. Ties in gain go to the lowest
/// feature index, then the lowest threshold.
pub fn build_tree(
    rows: &[usize],
    x: FeatureMatrix<'_>,
    grad: &[f64],
    hess: &[f64],
    params: TreeParams,
) -> Result<TreeNode> {
    let presorted = x.presort();
    let mut member = vec![false; x.rows()];
    for &r in rows {
        member[r] = true;
    }
    build_tree_presorted(&presorted, &member, x, grad, hess, params)
}

fn build_tree_presorted(
    presorted: &[Vec<usize>],
    member: &[bool],
    x: FeatureMatrix<'_>,
    grad: &[f64],
    hess: &[f64],
    params: TreeParams,
) -> Result<TreeNode> {
    if grad.len() != x.rows() || hess.len() != x.rows() {
        return Err(Error::Dimension {
            expected: x.rows(),
            got: grad.len().min(hess.len()),
        });
    }
    let sorted: Vec<Vec<usize>> = presorted
        .iter()
        .map(|order| order.iter().copied().filter(|&r| member[r]).collect())
        .collect();
    if sorted.first().is_none_or(Vec::is_empty) {
        return Err(Error::InsufficientData("cannot grow a tree on zero rows".into()));
    }
    let mut grower = Grower {
        x,
        grad,
        hess,
        params,
        goes_left: vec![false; x.rows()],
    };
    grower.grow(sorted, 0)
}

// ---------------------------------------------------------------------------
// Ensemble
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub margins: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub config: BoostConfig,
    pub num_features: usize,
    /// `trees[round][class]`
    pub trees: Vec<Vec<TreeNode>>,
    /// Mean training cross-entropy on all rows: entry 0 before any round,
    /// entry `r` after round `r`.
    pub loss_history: Vec<f64>,
    pub hessian: String,
    pub hessian_floor: f64,
}

impl BoostedModel {
    pub fn num_trees(&self) -> usize {
        self.trees.iter().map(Vec::len).sum()
    }

    pub fn margins(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.num_features {
            return Err(Error::Dimension {
                expected: self.num_features,
                got: x.len(),
            });
        }
        let mut m = vec![0.0; self.config.num_class];
        for round in &self.trees {
            for (k, tree) in round.iter().enumerate() {
                m[k] += tree.predict(x);
            }
        }
        Ok(m)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let margins = self.margins(x)?;
        let probabilities = softmax(&margins);
        let label = argmax(&probabilities);
        Ok(Prediction {
            margins,
            probabilities,
            label,
        })
    }

    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Vec<Prediction>> {
        ds.samples().iter().map(|s| self.predict(&s.features)).collect()
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn train(ds: &Dataset, config: &BoostConfig) -> Result<BoostedModel> {
    let flat: Vec<f64> = ds
        .samples()
        .iter()
        .flat_map(|s| s.features.iter().copied())
        .collect();
    let x = FeatureMatrix::new(&flat, ds.dims())?;
    train_matrix(x, &ds.labels(), config)
}

pub fn train_matrix(x: FeatureMatrix<'_>, labels: &[usize], config: &BoostConfig) -> Result<BoostedModel> {
    config.validate()?;
    let n = x.rows();
    if labels.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: labels.len(),
        });
    }
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "boosting needs at least 2 rows, got {n}"
        )));
    }
    let k = config.num_class;
    if let Some(&label) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::Label { label, num_class: k });
    }

    let presorted = x.presort();
    let params = config.tree_params();
    let sample_size = ((config.subsample * n as f64).round() as usize).clamp(1, n);

    let mut margins = vec![vec![0.0; k]; n];
    let mut loss_history = vec![cross_entropy(&margins, labels)];
    let mut trees = Vec::with_capacity(config.num_rounds);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];

    for round in 0..config.num_rounds {
        let member = if sample_size == n {
            vec![true; n]
        } else {
            let mut prng = rng::derived(config.seed, &format!("boost/round/{round}"));
            let mut m = vec![false; n];
            for i in index::sample(&mut prng, n, sample_size) {
                m[i] = true;
            }
            m
        };

        let pairs: Vec<Vec<(f64, f64)>> = margins
            .iter()
            .zip(labels)
            .map(|(m, &y)| grad_hess(&softmax(m), y))
            .collect();

        let mut round_trees = Vec::with_capacity(k);
        for class in 0..k {
            for (i, gh) in pairs.iter().enumerate() {
                grad[i] = gh[class].0;
                hess[i] = gh[class].1;
            }
            round_trees.push(build_tree_presorted(
                &presorted, &member, x, &grad, &hess, params,
            )?);
        }
        for (i, m) in margins.iter_mut().enumerate() {
            let row = x.row(i);
            for (class, tree) in round_trees.iter().enumerate() {
                m[class] += tree.predict(row);
            }
        }
        let loss = cross_entropy(&margins, labels);
        if !loss.is_finite() {
            return Err(Error::Divergence {
                iteration: round,
                loss,
            });
        }
        loss_history.push(loss);
        trees.push(round_trees);
    }

    Ok(BoostedModel {
        config: config.clone(),
        num_features: x.cols(),
        trees,
        loss_history,
        hessian: "2p(1-p)".into(),
        hessian_floor: HESSIAN_FLOOR,
    })
}
