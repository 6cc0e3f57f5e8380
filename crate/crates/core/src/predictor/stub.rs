use std::fmt;
use std::sync::Arc;

use super::{validate_labels, ImagePredictor, PredictorError, PredictorKind};
use crate::explain::RasterImage;

type ScoreFn = dyn Fn(&RasterImage) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
pub enum StubBehavior {
    Uniform,
    /// Same vector for every input. Not validated until prediction.
    Fixed(Vec<f64>),
    Function(Arc<ScoreFn>),
}

impl fmt::Debug for StubBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StubBehavior::Uniform => f.write_str("Uniform"),
            StubBehavior::Fixed(v) => f.debug_tuple("Fixed").field(v).finish(),
            StubBehavior::Function(_) => f.write_str("Function(..)"),
        }
    }
}

/// Deterministic predictor for tests and wiring checks.
#[derive(Debug, Clone)]
pub struct StubPredictor {
    labels: Vec<String>,
    behavior: StubBehavior,
}

impl StubPredictor {
    pub fn new(labels: Vec<String>, behavior: StubBehavior) -> Result<Self, PredictorError> {
        validate_labels(&labels)?;
        Ok(Self { labels, behavior })
    }

    pub fn uniform(labels: Vec<String>) -> Result<Self, PredictorError> {
        Self::new(labels, StubBehavior::Uniform)
    }

    pub fn from_fn(
        labels: Vec<String>,
        f: impl Fn(&RasterImage) -> Vec<f64> + Send + Sync + 'static,
    ) -> Result<Self, PredictorError> {
        Self::new(labels, StubBehavior::Function(Arc::new(f)))
    }
}

impl ImagePredictor for StubPredictor {
    fn kind(&self) -> PredictorKind {
        PredictorKind::Stub
    }

    fn labels(&self) -> &[String] {
        &self.labels
    }

    fn predict_proba(&self, image: &RasterImage) -> Result<Vec<f64>, PredictorError> {
        Ok(match &self.behavior {
            StubBehavior::Uniform => vec![1.0 / self.labels.len() as f64; self.labels.len()],
            StubBehavior::Fixed(v) => v.clone(),
            StubBehavior::Function(f) => f(image),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_stub() {
        let labels: Vec<String> = (0..38).map(|i| format!("c{i}")).collect();
        let stub = StubPredictor::uniform(labels).unwrap();
        let p = stub
            .predict_proba(&RasterImage::filled(3, 3, [9; 3]))
            .unwrap();
        assert!(p.iter().all(|&v| v == 1.0 / 38.0));
    }
}
