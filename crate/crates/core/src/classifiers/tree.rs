//! Entropy-criterion classification trees.
//!
//! Split candidates are midpoints between consecutive distinct sorted values
//! of a feature; a sample goes left when `x[feature] <= threshold`. Among
//! equal-gain candidates the lower feature index wins, then the lower
//! threshold.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Classifier, ClassifierError, Model, TrainingSet};

/// Splits must reduce entropy by more than this to be accepted.
pub(crate) const MIN_GAIN: f64 = 1e-12;

/// Shannon entropy in bits of a class histogram.
pub fn entropy(class_counts: &[usize]) -> Result<f64, ClassifierError> {
    let total: usize = class_counts.iter().sum();
    if total == 0 {
        return Err(ClassifierError::AllZero);
    }
    Ok(entropy_of(class_counts, total))
}

pub(crate) fn entropy_of(counts: &[usize], total: usize) -> f64 {
    let total = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        distribution: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationTree {
    nodes: Vec<Node>,
    /// Sample-weighted entropy decrease per feature, unnormalized.
    impurity_decrease: Vec<f64>,
}

impl ClassificationTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_distribution(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { distribution } => return distribution,
                Node::Split {
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

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Impurity decrease normalized to sum to 1 (all zeros for a lone leaf).
    pub fn normalized_importance(&self) -> Vec<f64> {
        normalize(&self.impurity_decrease)
    }
}

pub(crate) fn normalize(v: &[f64]) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter().map(|x| x / total).collect()
    } else {
        vec![0.0; v.len()]
    }
}

/// Growth limits for a single tree.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowOptions {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Features drawn per node; `None` evaluates all of them.
    pub max_features: Option<usize>,
}

struct Grower<'a> {
    columns: &'a [Vec<f64>],
    labels: &'a [usize],
    n_classes: usize,
    opts: GrowOptions,
    rng: Option<&'a mut ChaCha8Rng>,
    nodes: Vec<Node>,
    impurity_decrease: Vec<f64>,
    root_size: f64,
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Candidate {
    fn beats(&self, other: &Option<Candidate>) -> bool {
        match other {
            None => true,
            Some(o) => self.gain > o.gain || (self.gain == o.gain && self.feature < o.feature),
        }
    }
}

/// Grows a tree over the samples listed in `indices` (duplicates allowed, as
/// in bootstrap resamples).
pub(crate) fn grow_tree(
    columns: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    indices: &mut [usize],
    opts: GrowOptions,
    rng: Option<&mut ChaCha8Rng>,
) -> ClassificationTree {
    let mut g = Grower {
        columns,
        labels,
        n_classes,
        opts,
        rng,
        nodes: Vec::new(),
        impurity_decrease: vec![0.0; columns.len()],
        root_size: indices.len() as f64,
    };
    g.grow(indices, 0);
    ClassificationTree {
        nodes: g.nodes,
        impurity_decrease: g.impurity_decrease,
    }
}

impl Grower<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in idx {
            c[self.labels[i]] += 1;
        }
        c
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let counts = self.counts(idx);
        let n = idx.len();
        let id = self.nodes.len();
        let leaf = Node::Leaf {
            distribution: counts.iter().map(|&c| c as f64 / n as f64).collect(),
        };
        self.nodes.push(leaf);

        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_reached = self.opts.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached || n < self.opts.min_samples_split.max(2) {
            return id;
        }
        let parent_h = entropy_of(&counts, n);
        let Some(best) = self.find_split(idx, &counts, parent_h) else {
            return id;
        };

        self.impurity_decrease[best.feature] += n as f64 / self.root_size * best.gain;
        let col = &self.columns[best.feature];
        let mut mid = 0;
        for i in 0..n {
            if col[idx[i]] <= best.threshold {
                idx.swap(i, mid);
                mid += 1;
            }
        }
        let (l, r) = idx.split_at_mut(mid);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn find_split(&mut self, idx: &[usize], counts: &[usize], parent_h: f64) -> Option<Candidate> {
        let d = self.columns.len();
        let mut order: Vec<usize> = (0..d).collect();
        let draw = match (self.opts.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < d => {
                order.shuffle(rng);
                m
            }
            _ => d,
        };
        let mut best: Option<Candidate> = None;
        // Keep drawing past `draw` only until some feature yields a valid split.
        for (visited, &f) in order.iter().enumerate() {
            if visited >= draw && best.is_some() {
                break;
            }
            if let Some(c) = self.best_on_feature(idx, f, counts, parent_h) {
                if c.beats(&best) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn best_on_feature(
        &self,
        idx: &[usize],
        f: usize,
        counts: &[usize],
        parent_h: f64,
    ) -> Option<Candidate> {
        let col = &self.columns[f];
        let mut sorted = idx.to_vec();
        sorted.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
        let n = sorted.len();
        let mut left = vec![0usize; self.n_classes];
        let mut right = counts.to_vec();
        let mut best: Option<Candidate> = None;
        for pos in 0..n - 1 {
            let s = sorted[pos];
            left[self.labels[s]] += 1;
            right[self.labels[s]] -= 1;
            let (v, next) = (col[s], col[sorted[pos + 1]]);
            if v == next {
                continue;
            }
            let nl = pos + 1;
            let nr = n - nl;
            let child =
                (nl as f64 * entropy_of(&left, nl) + nr as f64 * entropy_of(&right, nr)) / n as f64;
            let gain = parent_h - child;
            if gain > MIN_GAIN && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Candidate {
                    gain,
                    feature: f,
                    threshold: midpoint(v, next),
                });
            }
        }
        best
    }
}

pub(crate) fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    // adjacent floats: the midpoint can round up onto `b`
    if m >= b {
        a
    } else {
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for DecisionTreeParams {
    fn default() -> Self {
        Self {
            max_depth: 5,
            min_samples_split: 2,
        }
    }
}

impl Model for ClassificationTree {
    fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        self.leaf_distribution(x).to_vec()
    }

    fn feature_importance(&self) -> Option<Vec<f64>> {
        Some(self.normalized_importance())
    }

    fn payload(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("tree serializes")
    }
}

impl Classifier for DecisionTreeParams {
    fn name(&self) -> &'static str {
        "decision_tree"
    }

    fn validate(&self) -> Result<(), ClassifierError> {
        if self.max_depth == 0 {
            return Err(ClassifierError::InvalidSpec(
                "max_depth must be positive".into(),
            ));
        }
        Ok(())
    }

    fn fit(&self, data: &TrainingSet<'_>) -> Result<Box<dyn Model>, ClassifierError> {
        let columns = data.columns();
        let mut idx: Vec<usize> = (0..data.len()).collect();
        let opts = GrowOptions {
            max_depth: Some(self.max_depth),
            min_samples_split: self.min_samples_split,
            max_features: None,
        };
        Ok(Box::new(grow_tree(
            &columns,
            data.labels,
            data.n_classes,
            &mut idx,
            opts,
            None,
        )))
    }

    fn decode(&self, payload: serde_json::Value) -> Result<Box<dyn Model>, serde_json::Error> {
        Ok(Box::new(serde_json::from_value::<ClassificationTree>(
            payload,
        )?))
    }
}
