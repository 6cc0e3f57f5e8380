//! Six crop-recommendation classifiers behind one training/prediction
//! contract.
//!
//! Every algorithm implements [`Classifier`] (the training strategy) and
//! produces a boxed [`Model`]. [`ClassifierSpec`] carries the hyperparameters
//! and dispatches to the strategy; [`registry`] resolves command-line names to
//! default specs. [`TrainedClassifier`] wraps a model with its class names and
//! any embedded input scaler, and is what callers persist and serve.

pub mod boosting;
pub mod forest;
pub mod logistic;
pub mod naive_bayes;
mod registry;
pub mod svm;
pub mod tree;

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{self, ArtifactError};
use crate::tabular::{fit_minmax, ScalerParams};

pub use boosting::BoostingParams;
pub use forest::RandomForestParams;
pub use logistic::LogisticParams;
pub use naive_bayes::NaiveBayesParams;
pub use registry::{lookup, registry, RegistryEntry};
pub use svm::SvmParams;
pub use tree::{entropy, DecisionTreeParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifierError {
    #[error("training data contains a single class")]
    SingleClass,
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("{features} feature rows but {labels} labels")]
    LabelCountMismatch { features: usize, labels: usize },
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite feature at row {row}, column {column}")]
    NonFiniteFeature { row: usize, column: usize },
    #[error("{algorithm} did not converge within {iterations} iterations")]
    NonConvergence {
        algorithm: &'static str,
        iterations: usize,
    },
    #[error("class counts are all zero")]
    AllZero,
    #[error("feature importance is not available for {0}")]
    UnsupportedModel(&'static str),
    #[error("invalid hyperparameter: {0}")]
    InvalidSpec(String),
    #[error("unknown model `{name}`; valid names: {}", valid.join(", "))]
    UnknownModelName { name: String, valid: Vec<String> },
}

/// Label-encoded training data. `labels[i] < n_classes`.
#[derive(Debug, Clone, Copy)]
pub struct TrainingSet<'a> {
    pub features: &'a [Vec<f64>],
    pub labels: &'a [usize],
    pub n_classes: usize,
}

impl TrainingSet<'_> {
    pub fn n_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Column-major copy of the feature matrix.
    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.n_features())
            .map(|j| self.features.iter().map(|r| r[j]).collect())
            .collect()
    }
}

/// A fitted model. Inputs to `predict_proba` are already scaled.
pub trait Model: Send + Sync + Debug {
    fn predict_proba(&self, x: &[f64]) -> Vec<f64>;

    /// Normalized impurity-based importance, for tree models.
    fn feature_importance(&self) -> Option<Vec<f64>> {
        None
    }

    fn payload(&self) -> serde_json::Value;
}

/// A training strategy. Implemented by each hyperparameter struct.
pub trait Classifier: Send + Sync {
    fn name(&self) -> &'static str;

    fn validate(&self) -> Result<(), ClassifierError> {
        Ok(())
    }

    /// Whether inputs are min-max scaled to [0, 1] before `fit`/predict.
    fn requires_unit_scaling(&self) -> bool {
        false
    }

    fn fit(&self, data: &TrainingSet<'_>) -> Result<Box<dyn Model>, ClassifierError>;

    fn decode(&self, payload: serde_json::Value) -> Result<Box<dyn Model>, serde_json::Error>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum ClassifierSpec {
    DecisionTree(DecisionTreeParams),
    NaiveBayes(NaiveBayesParams),
    Svm(SvmParams),
    LogisticRegression(LogisticParams),
    RandomForest(RandomForestParams),
    GradientBoostedTrees(BoostingParams),
}

impl ClassifierSpec {
    pub fn strategy(&self) -> &dyn Classifier {
        match self {
            ClassifierSpec::DecisionTree(p) => p,
            ClassifierSpec::NaiveBayes(p) => p,
            ClassifierSpec::Svm(p) => p,
            ClassifierSpec::LogisticRegression(p) => p,
            ClassifierSpec::RandomForest(p) => p,
            ClassifierSpec::GradientBoostedTrees(p) => p,
        }
    }

    pub fn name(&self) -> &'static str {
        self.strategy().name()
    }

    /// Replaces the seed of randomized algorithms; no-op for the others.
    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            ClassifierSpec::RandomForest(p) => p.seed = seed,
            ClassifierSpec::GradientBoostedTrees(p) => p.seed = seed,
            _ => {}
        }
        self
    }

    pub fn is_tree_model(&self) -> bool {
        matches!(
            self,
            ClassifierSpec::DecisionTree(_)
                | ClassifierSpec::RandomForest(_)
                | ClassifierSpec::GradientBoostedTrees(_)
        )
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Derives an independent sub-seed, e.g. one per tree.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// An immutable trained model plus everything needed to serve it.
#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    spec: ClassifierSpec,
    class_names: Vec<String>,
    n_features: usize,
    scaler: Option<ScalerParams>,
    model: Arc<dyn Model>,
}

pub const CLASSIFIER_ARTIFACT_KIND: &str = "classifier";

#[derive(Serialize, Deserialize)]
struct ClassifierArtifact {
    spec: ClassifierSpec,
    class_names: Vec<String>,
    n_features: usize,
    scaler: Option<ScalerParams>,
    params: serde_json::Value,
}

impl TrainedClassifier {
    /// Trains on string labels; class order is first appearance.
    pub fn train<S: AsRef<str>>(
        spec: &ClassifierSpec,
        features: &[Vec<f64>],
        labels: &[S],
    ) -> Result<Self, ClassifierError> {
        let mut class_names: Vec<String> = Vec::new();
        let mut encoded = Vec::with_capacity(labels.len());
        for l in labels {
            let l = l.as_ref();
            let idx = match class_names.iter().position(|c| c == l) {
                Some(i) => i,
                None => {
                    class_names.push(l.to_string());
                    class_names.len() - 1
                }
            };
            encoded.push(idx);
        }
        Self::train_encoded(spec, features, &encoded, class_names)
    }

    /// Trains on label indices into `class_names`. Classes absent from
    /// `labels` receive zero probability mass from most models.
    pub fn train_encoded(
        spec: &ClassifierSpec,
        features: &[Vec<f64>],
        labels: &[usize],
        class_names: Vec<String>,
    ) -> Result<Self, ClassifierError> {
        let strategy = spec.strategy();
        strategy.validate()?;
        if features.len() != labels.len() {
            return Err(ClassifierError::LabelCountMismatch {
                features: features.len(),
                labels: labels.len(),
            });
        }
        let n_features = features
            .first()
            .ok_or(ClassifierError::EmptyTrainingSet)?
            .len();
        for (row, x) in features.iter().enumerate() {
            if x.len() != n_features {
                return Err(ClassifierError::DimensionMismatch {
                    expected: n_features,
                    found: x.len(),
                });
            }
            if let Some(column) = x.iter().position(|v| !v.is_finite()) {
                return Err(ClassifierError::NonFiniteFeature { row, column });
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(ClassifierError::InvalidSpec(format!(
                "label index {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        if labels.iter().all(|&l| l == labels[0]) {
            return Err(ClassifierError::SingleClass);
        }

        let (scaler, scaled);
        let inputs: &[Vec<f64>] = if strategy.requires_unit_scaling() {
            let params = fit_minmax(features).map_err(|_| ClassifierError::EmptyTrainingSet)?;
            scaled = features.iter().map(|x| params.apply(x)).collect::<Vec<_>>();
            scaler = Some(params);
            &scaled
        } else {
            scaler = None;
            features
        };

        let model = strategy.fit(&TrainingSet {
            features: inputs,
            labels,
            n_classes: class_names.len(),
        })?;
        Ok(Self {
            spec: spec.clone(),
            class_names,
            n_features,
            scaler,
            model: Arc::from(model),
        })
    }

    pub fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn scaler(&self) -> Option<&ScalerParams> {
        self.scaler.as_ref()
    }

    pub fn model(&self) -> &dyn Model {
        self.model.as_ref()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, ClassifierError> {
        if x.len() != self.n_features {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        let mut p = match &self.scaler {
            Some(s) => self.model.predict_proba(&s.apply(x)),
            None => self.model.predict_proba(x),
        };
        let sum: f64 = p.iter().sum();
        if sum > 0.0 && sum != 1.0 {
            p.iter_mut().for_each(|v| *v /= sum);
        }
        Ok(p)
    }

    pub fn predict_index(&self, x: &[f64]) -> Result<usize, ClassifierError> {
        Ok(argmax(&self.predict_proba(x)?))
    }

    pub fn predict(&self, x: &[f64]) -> Result<&str, ClassifierError> {
        Ok(&self.class_names[self.predict_index(x)?])
    }

    /// Mean decrease in impurity per feature, normalized to sum to 1.
    pub fn feature_importance(&self) -> Result<Vec<f64>, ClassifierError> {
        if !self.spec.is_tree_model() {
            return Err(ClassifierError::UnsupportedModel(self.spec.name()));
        }
        self.model
            .feature_importance()
            .ok_or(ClassifierError::UnsupportedModel(self.spec.name()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let body = ClassifierArtifact {
            spec: self.spec.clone(),
            class_names: self.class_names.clone(),
            n_features: self.n_features,
            scaler: self.scaler.clone(),
            params: self.model.payload(),
        };
        artifact::encode(CLASSIFIER_ARTIFACT_KIND, &body)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ArtifactError> {
        let body: ClassifierArtifact = artifact::decode(bytes, CLASSIFIER_ARTIFACT_KIND)?;
        let model = body
            .spec
            .strategy()
            .decode(body.params)
            .map_err(|e| ArtifactError::Payload(e.to_string()))?;
        Ok(Self {
            spec: body.spec,
            class_names: body.class_names,
            n_features: body.n_features,
            scaler: body.scaler,
            model: Arc::from(model),
        })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<(), ArtifactError> {
        artifact::write_file(path, &self.to_bytes())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, ArtifactError> {
        Self::from_bytes(&artifact::read_file(path)?)
    }
}
