//! Black-box leaf-image classifiers.
//!
//! [`ImagePredictor`] is the contract LIME and the service program against.
//! Three implementations exist: a trainable softmax-regression
//! [`ReferencePredictor`], an HTTP [`ExternalPredictor`] bridging to a
//! full-scale model served elsewhere, and a configurable [`StubPredictor`].
//! [`PredictorHandle`] wraps any of them and enforces the output contract.

mod catalog;
mod external;
mod reference;
mod stub;

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::ArtifactError;
use crate::explain::RasterImage;

pub use catalog::{CatalogError, DiseaseCatalog, DiseaseEntry, ResolvedDisease};
pub use external::{ExternalConfig, ExternalPredictor, ExternalReply, ExternalRequest};
pub use reference::{
    evaluate_holdout, load_labeled_images, train_reference_predictor, HoldoutReport, LabeledImages,
    ReferencePredictor, ReferenceTrainingConfig,
};
pub use stub::{StubBehavior, StubPredictor};

/// Tolerance on `sum(probs) == 1`.
pub const SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictorError {
    #[error("external predictor unavailable after {attempts} attempt(s): {message}")]
    ExternalUnavailable { attempts: usize, message: String },
    #[error("predictor protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("need at least 2 class folders with images, found {found}")]
    TooFewClasses { found: usize },
    #[error("class `{class}` has {found} image(s); at least 2 are required")]
    TooFewImages { class: String, found: usize },
    #[error("cannot read image {path}: {message}")]
    UnreadableImage { path: String, message: String },
    #[error("invalid label list: {0}")]
    InvalidLabels(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    Reference,
    External,
    Stub,
}

pub trait ImagePredictor: Send + Sync + Debug {
    fn kind(&self) -> PredictorKind;
    fn labels(&self) -> &[String];
    /// One probability per label.
    fn predict_proba(&self, image: &RasterImage) -> Result<Vec<f64>, PredictorError>;
}

/// Rejects empty or duplicated label lists.
pub fn validate_labels(labels: &[String]) -> Result<(), PredictorError> {
    if labels.is_empty() {
        return Err(PredictorError::InvalidLabels("label list is empty".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for l in labels {
        if !seen.insert(l) {
            return Err(PredictorError::InvalidLabels(format!(
                "duplicate label `{l}`"
            )));
        }
    }
    Ok(())
}

/// Checks length, non-negativity and unit sum.
pub fn validate_distribution(probs: &[f64], n_labels: usize) -> Result<(), PredictorError> {
    if probs.len() != n_labels {
        return Err(PredictorError::ProtocolViolation(format!(
            "{} probabilities for {} labels",
            probs.len(),
            n_labels
        )));
    }
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(PredictorError::ProtocolViolation(format!(
            "invalid probability {p}"
        )));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(PredictorError::ProtocolViolation(format!(
            "probabilities sum to {sum}"
        )));
    }
    Ok(())
}

/// Shared, immutable predictor. Every prediction is checked against the
/// distribution contract before it is returned.
#[derive(Debug, Clone)]
pub struct PredictorHandle {
    inner: Arc<dyn ImagePredictor>,
}

impl PredictorHandle {
    pub fn new(predictor: impl ImagePredictor + 'static) -> Result<Self, PredictorError> {
        validate_labels(predictor.labels())?;
        Ok(Self {
            inner: Arc::new(predictor),
        })
    }

    pub fn kind(&self) -> PredictorKind {
        self.inner.kind()
    }

    pub fn labels(&self) -> &[String] {
        self.inner.labels()
    }

    pub fn predict_proba(&self, image: &RasterImage) -> Result<Vec<f64>, PredictorError> {
        let probs = self.inner.predict_proba(image)?;
        validate_distribution(&probs, self.labels().len())?;
        Ok(probs)
    }

    /// `(label index, probability)` of the most likely label; ties go to the
    /// lower index.
    pub fn predict(&self, image: &RasterImage) -> Result<(usize, f64), PredictorError> {
        let probs = self.predict_proba(image)?;
        let best = crate::classifiers::argmax(&probs);
        Ok((best, probs[best]))
    }
}

impl ImagePredictor for PredictorHandle {
    fn kind(&self) -> PredictorKind {
        self.inner.kind()
    }

    fn labels(&self) -> &[String] {
        self.inner.labels()
    }

    fn predict_proba(&self, image: &RasterImage) -> Result<Vec<f64>, PredictorError> {
        PredictorHandle::predict_proba(self, image)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distribution_rules() {
        assert!(validate_distribution(&[0.25, 0.75], 2).is_ok());
        assert!(validate_distribution(&[0.5, 0.3], 2).is_err());
        assert!(validate_distribution(&[1.2, -0.2], 2).is_err());
        assert!(validate_distribution(&[1.0], 2).is_err());
        assert!(validate_distribution(&[f64::NAN, 1.0], 2).is_err());
    }

    #[test]
    fn label_rules() {
        assert!(validate_labels(&[]).is_err());
        assert!(validate_labels(&["a".into(), "a".into()]).is_err());
        assert!(validate_labels(&["a".into(), "b".into()]).is_ok());
    }

    #[test]
    fn handle_rejects_bad_stub_output() {
        let stub = StubPredictor::new(
            vec!["a".into(), "b".into()],
            StubBehavior::Fixed(vec![0.5, 0.3]),
        )
        .unwrap();
        let handle = PredictorHandle::new(stub).unwrap();
        assert!(matches!(
            handle.predict_proba(&RasterImage::filled(2, 2, [0; 3])),
            Err(PredictorError::ProtocolViolation(_))
        ));
    }
}
