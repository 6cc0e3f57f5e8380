use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, normalize, ClassificationTree, GrowOptions};
use super::{derive_seed, Classifier, ClassifierError, Model, TrainingSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestParams {
    pub n_estimators: usize,
    /// Features drawn at each split; `None` means `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    /// `None` grows until leaves are pure.
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for RandomForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 20,
            max_features: None,
            bootstrap: true,
            max_depth: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<ClassificationTree>,
    n_classes: usize,
}

impl RandomForest {
    pub fn trees(&self) -> &[ClassificationTree] {
        &self.trees
    }
}

impl Model for RandomForest {
    fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (acc, v) in p.iter_mut().zip(t.leaf_distribution(x)) {
                *acc += v;
            }
        }
        let n = self.trees.len() as f64;
        p.iter_mut().for_each(|v| *v /= n);
        p
    }

    fn feature_importance(&self) -> Option<Vec<f64>> {
        let d = self.trees.first()?.normalized_importance().len();
        let mut total = vec![0.0; d];
        for t in &self.trees {
            for (acc, v) in total.iter_mut().zip(t.normalized_importance()) {
                *acc += v;
            }
        }
        Some(normalize(&total))
    }

    fn payload(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("forest serializes")
    }
}

impl Classifier for RandomForestParams {
    fn name(&self) -> &'static str {
        "random_forest"
    }

    fn validate(&self) -> Result<(), ClassifierError> {
        if self.n_estimators == 0 {
            return Err(ClassifierError::InvalidSpec(
                "n_estimators must be positive".into(),
            ));
        }
        if self.max_features == Some(0) || self.max_depth == Some(0) {
            return Err(ClassifierError::InvalidSpec(
                "max_features and max_depth must be positive".into(),
            ));
        }
        Ok(())
    }

    fn fit(&self, data: &TrainingSet<'_>) -> Result<Box<dyn Model>, ClassifierError> {
        let columns = data.columns();
        let d = columns.len();
        let n = data.len();
        let opts = GrowOptions {
            max_depth: self.max_depth,
            min_samples_split: 2,
            max_features: Some(
                self.max_features
                    .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
                    .min(d),
            ),
        };
        let trees = (0..self.n_estimators)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, t as u64));
                let mut idx: Vec<usize> = if self.bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                grow_tree(
                    &columns,
                    data.labels,
                    data.n_classes,
                    &mut idx,
                    opts,
                    Some(&mut rng),
                )
            })
            .collect();
        Ok(Box::new(RandomForest {
            trees,
            n_classes: data.n_classes,
        }))
    }

    fn decode(&self, payload: serde_json::Value) -> Result<Box<dyn Model>, serde_json::Error> {
        Ok(Box::new(serde_json::from_value::<RandomForest>(payload)?))
    }
}
