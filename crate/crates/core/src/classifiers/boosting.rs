//! Multiclass gradient-boosted regression trees with a softmax link.
//!
//! Each round fits one depth-limited least-squares tree per class to the
//! negative gradient `y_k - p_k` of the cross-entropy, with leaf values equal
//! to the mean residual, and adds it to the class score scaled by the
//! learning rate. Scores start at the log class priors, so zero rounds
//! predict the training prior.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{midpoint, normalize};
use super::{softmax, Classifier, ClassifierError, Model, TrainingSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostingParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    /// Accepted for interface symmetry; training is fully deterministic.
    pub seed: u64,
}

impl Default for BoostingParams {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RegressionNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<RegressionNode>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                RegressionNode::Leaf { value } => return *value,
                RegressionNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }
}

struct RegressionGrower<'a> {
    columns: &'a [Vec<f64>],
    targets: &'a [f64],
    max_depth: usize,
    nodes: Vec<RegressionNode>,
    importance: Vec<f64>,
}

impl RegressionGrower<'_> {
    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let n = idx.len();
        let sum: f64 = idx.iter().map(|&i| self.targets[i]).sum();
        let id = self.nodes.len();
        self.nodes.push(RegressionNode::Leaf {
            value: sum / n as f64,
        });
        if depth >= self.max_depth || n < 2 {
            return id;
        }
        // best (sse decrease, feature, threshold); ties keep the earlier candidate
        let mut best: Option<(f64, usize, f64)> = None;
        for (f, col) in self.columns.iter().enumerate() {
            let mut sorted = idx.to_vec();
            sorted.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
            let mut left_sum = 0.0;
            for pos in 0..n - 1 {
                left_sum += self.targets[sorted[pos]];
                let (v, next) = (col[sorted[pos]], col[sorted[pos + 1]]);
                if v == next {
                    continue;
                }
                let nl = (pos + 1) as f64;
                let nr = (n - pos - 1) as f64;
                let right_sum = sum - left_sum;
                let gain =
                    left_sum * left_sum / nl + right_sum * right_sum / nr - sum * sum / n as f64;
                if gain > 1e-12 && best.is_none_or(|b| gain > b.0) {
                    best = Some((gain, f, midpoint(v, next)));
                }
            }
        }
        let Some((gain, feature, threshold)) = best else {
            return id;
        };
        self.importance[feature] += gain;
        let col = &self.columns[feature];
        let mut mid = 0;
        for i in 0..n {
            if col[idx[i]] <= threshold {
                idx.swap(i, mid);
                mid += 1;
            }
        }
        let (l, r) = idx.split_at_mut(mid);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = RegressionNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

fn fit_regression_tree(
    columns: &[Vec<f64>],
    targets: &[f64],
    max_depth: usize,
) -> (RegressionTree, Vec<f64>) {
    let mut g = RegressionGrower {
        columns,
        targets,
        max_depth,
        nodes: Vec::new(),
        importance: vec![0.0; columns.len()],
    };
    let mut idx: Vec<usize> = (0..targets.len()).collect();
    g.grow(&mut idx, 0);
    (RegressionTree { nodes: g.nodes }, g.importance)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTrees {
    learning_rate: f64,
    base_scores: Vec<f64>,
    /// `rounds[r][class]`
    rounds: Vec<Vec<RegressionTree>>,
    /// Normalized squared-error decrease per feature.
    importance: Vec<f64>,
}

impl BoostedTrees {
    fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.base_scores.clone();
        for round in &self.rounds {
            for (acc, tree) in s.iter_mut().zip(round) {
                *acc += self.learning_rate * tree.predict(x);
            }
        }
        s
    }
}

impl Model for BoostedTrees {
    fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.scores(x))
    }

    fn feature_importance(&self) -> Option<Vec<f64>> {
        Some(self.importance.clone())
    }

    fn payload(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("boosted trees serialize")
    }
}

/// Floor for log priors of classes missing from the training data.
const MIN_LOG_PRIOR: f64 = -30.0;

impl Classifier for BoostingParams {
    fn name(&self) -> &'static str {
        "gradient_boosted_trees"
    }

    fn validate(&self) -> Result<(), ClassifierError> {
        if !(self.learning_rate > 0.0) || self.max_depth == 0 {
            return Err(ClassifierError::InvalidSpec(
                "need learning_rate > 0 and max_depth > 0".into(),
            ));
        }
        Ok(())
    }

    fn fit(&self, data: &TrainingSet<'_>) -> Result<Box<dyn Model>, ClassifierError> {
        let n = data.len();
        let k = data.n_classes;
        let columns = data.columns();
        let mut counts = vec![0usize; k];
        for &l in data.labels {
            counts[l] += 1;
        }
        let base_scores: Vec<f64> = counts
            .iter()
            .map(|&c| {
                if c == 0 {
                    MIN_LOG_PRIOR
                } else {
                    (c as f64 / n as f64).ln()
                }
            })
            .collect();

        let mut scores = vec![base_scores.clone(); n];
        let mut rounds = Vec::with_capacity(self.n_rounds);
        let mut raw_importance = vec![0.0; columns.len()];
        for _ in 0..self.n_rounds {
            let probs: Vec<Vec<f64>> = scores.iter().map(|s| softmax(s)).collect();
            let fitted: Vec<(RegressionTree, Vec<f64>)> = (0..k)
                .into_par_iter()
                .map(|c| {
                    let residual: Vec<f64> = (0..n)
                        .map(|i| (data.labels[i] == c) as u8 as f64 - probs[i][c])
                        .collect();
                    fit_regression_tree(&columns, &residual, self.max_depth)
                })
                .collect();
            let mut trees = Vec::with_capacity(k);
            for (c, (tree, imp)) in fitted.into_iter().enumerate() {
                for (acc, v) in raw_importance.iter_mut().zip(imp) {
                    *acc += v;
                }
                for (i, s) in scores.iter_mut().enumerate() {
                    s[c] += self.learning_rate * tree.predict(&data.features[i]);
                }
                trees.push(tree);
            }
            rounds.push(trees);
        }
        Ok(Box::new(BoostedTrees {
            learning_rate: self.learning_rate,
            base_scores,
            rounds,
            importance: normalize(&raw_importance),
        }))
    }

    fn decode(&self, payload: serde_json::Value) -> Result<Box<dyn Model>, serde_json::Error> {
        Ok(Box::new(serde_json::from_value::<BoostedTrees>(payload)?))
    }
}
