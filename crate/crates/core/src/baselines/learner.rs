//! Small in-crate classifiers: a random-forest style tree ensemble and a
//! gradient-trained logistic regression.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{fit_scaling, ScalingParams};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    TreeEnsemble,
    LinearLogistic,
}

/// How many candidate features each split looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureRule {
    Sqrt,
    All,
    Fixed(usize),
}

impl FeatureRule {
    pub fn count(self, d: usize) -> usize {
        let m = match self {
            FeatureRule::Sqrt => (d as f64).sqrt().ceil() as usize,
            FeatureRule::All => d,
            FeatureRule::Fixed(m) => m,
        };
        m.clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    pub trees: usize,
    pub max_depth: usize,
    pub features_per_split: FeatureRule,
    pub learning_rate: f64,
    pub epochs: usize,
    /// L2 penalty for the linear learner.
    pub l2: f64,
    pub seed: u64,
}

impl LearnerConfig {
    pub fn tree_ensemble(seed: u64) -> Self {
        Self {
            kind: LearnerKind::TreeEnsemble,
            trees: 50,
            max_depth: 8,
            features_per_split: FeatureRule::Sqrt,
            learning_rate: 0.5,
            epochs: 300,
            l2: 1e-2,
            seed,
        }
    }

    pub fn linear_logistic(seed: u64) -> Self {
        Self {
            kind: LearnerKind::LinearLogistic,
            ..Self::tree_ensemble(seed)
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { vote: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { vote } => return vote,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

struct TreeBuilder<'a, R: Rng> {
    x: &'a Matrix,
    y: &'a [u8],
    max_depth: usize,
    mtry: usize,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

impl<R: Rng> TreeBuilder<'_, R> {
    fn leaf(&mut self, ids: &[usize]) -> usize {
        let pos = ids.iter().filter(|&&i| self.y[i] == 1).count();
        let vote = match (2 * pos).cmp(&ids.len()) {
            std::cmp::Ordering::Greater => 1.0,
            std::cmp::Ordering::Equal => 0.5,
            std::cmp::Ordering::Less => 0.0,
        };
        self.nodes.push(Node::Leaf { vote });
        self.nodes.len() - 1
    }

    /// Best `(feature, threshold, weighted impurity)` over a random feature subset.
    fn best_split(&mut self, ids: &[usize]) -> Option<(usize, f64, f64)> {
        let d = self.x.ncols();
        let total_pos = ids.iter().filter(|&&i| self.y[i] == 1).count();
        let n = ids.len();
        let mut best: Option<(usize, f64, f64)> = None;
        let mut feats = sample(self.rng, d, self.mtry).into_vec();
        feats.sort_unstable();
        let mut order: Vec<(f64, u8)> = Vec::with_capacity(n);
        for f in feats {
            order.clear();
            order.extend(ids.iter().map(|&i| (self.x.get(i, f), self.y[i])));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0;
            for s in 1..n {
                left_pos += usize::from(order[s - 1].1 == 1);
                if order[s].0 <= order[s - 1].0 {
                    continue;
                }
                let imp = (s as f64 * gini(left_pos, s)
                    + (n - s) as f64 * gini(total_pos - left_pos, n - s))
                    / n as f64;
                if best.is_none_or(|b| imp < b.2) {
                    let threshold = 0.5 * (order[s - 1].0 + order[s].0);
                    best = Some((f, threshold, imp));
                }
            }
        }
        best
    }

    fn grow(&mut self, ids: &[usize], depth: usize) -> usize {
        let pos = ids.iter().filter(|&&i| self.y[i] == 1).count();
        if depth >= self.max_depth || ids.len() < 2 || pos == 0 || pos == ids.len() {
            return self.leaf(ids);
        }
        let Some((feature, threshold, imp)) = self.best_split(ids) else {
            return self.leaf(ids);
        };
        if imp >= gini(pos, ids.len()) {
            return self.leaf(ids);
        }
        let (l, r): (Vec<usize>, Vec<usize>) = ids.iter().partition(|&&i| self.x.get(i, feature) <= threshold);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { vote: 0.0 });
        let left = self.grow(&l, depth + 1);
        let right = self.grow(&r, depth + 1);
        self.nodes[at] = Node::Split { feature, threshold, left, right };
        at
    }
}

/// A trained binary classifier.
#[derive(Debug, Clone)]
pub enum Classifier {
    Forest(Vec<Tree>),
    Linear {
        scaling: ScalingParams,
        weights: Vec<f64>,
        bias: f64,
    },
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Classifier {
    /// Probability-like score of the positive class, in `[0, 1]`.
    pub fn score(&self, row: &[f64]) -> f64 {
        match self {
            Classifier::Forest(trees) => trees.iter().map(|t| t.predict(row)).sum::<f64>() / trees.len() as f64,
            Classifier::Linear { scaling, weights, bias } => {
                let z: f64 = scaling
                    .apply_row(row)
                    .iter()
                    .zip(weights)
                    .map(|(x, w)| x * w)
                    .sum::<f64>()
                    + bias;
                sigmoid(z)
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> u8 {
        u8::from(self.score(row) > 0.5)
    }
}

pub fn train_learner(x: &Matrix, y: &[u8], cfg: &LearnerConfig) -> Result<Classifier> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    let pos = y.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::SingleClass);
    }
    if y.iter().any(|&l| l > 1) {
        return Err(Error::InvalidParameter("labels must be 0 or 1".into()));
    }
    match cfg.kind {
        LearnerKind::TreeEnsemble => train_forest(x, y, cfg),
        LearnerKind::LinearLogistic => Ok(train_linear(x, y, cfg)),
    }
}

fn train_forest(x: &Matrix, y: &[u8], cfg: &LearnerConfig) -> Result<Classifier> {
    if cfg.trees == 0 {
        return Err(Error::InvalidParameter("tree ensemble needs at least one tree".into()));
    }
    let n = x.nrows();
    let mtry = cfg.features_per_split.count(x.ncols());
    let trees = (0..cfg.trees)
        .map(|t| {
            let mut rng = seed::rng(seed::derive(cfg.seed, t as u64));
            let boot: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut b = TreeBuilder {
                x,
                y,
                max_depth: cfg.max_depth,
                mtry,
                rng: &mut rng,
                nodes: Vec::new(),
            };
            b.grow(&boot, 0);
            Tree { nodes: b.nodes }
        })
        .collect();
    Ok(Classifier::Forest(trees))
}

/// Full-batch gradient descent on the L2-penalized mean log loss.
fn train_linear(x: &Matrix, y: &[u8], cfg: &LearnerConfig) -> Classifier {
    let scaling = fit_scaling(x);
    let z = scaling.apply(x);
    let (n, d) = (z.nrows(), z.ncols());
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut grad = vec![0.0; d];
    for _ in 0..cfg.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut gb = 0.0;
        for (row, &label) in z.rows_iter().zip(y) {
            let p = sigmoid(row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() + b);
            let e = p - f64::from(label);
            for (g, a) in grad.iter_mut().zip(row) {
                *g += e * a;
            }
            gb += e;
        }
        for (wj, gj) in w.iter_mut().zip(&grad) {
            *wj -= cfg.learning_rate * (gj / n as f64 + cfg.l2 * *wj);
        }
        b -= cfg.learning_rate * gb / n as f64;
    }
    Classifier::Linear { scaling, weights: w, bias: b }
}
