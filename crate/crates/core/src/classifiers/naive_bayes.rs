use serde::{Deserialize, Serialize};

use super::{softmax, Classifier, ClassifierError, Model, TrainingSet};

/// Gaussian naive Bayes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesParams {
    /// Added to every per-class variance, as a fraction of the largest
    /// feature variance in the training set.
    pub var_smoothing: f64,
}

impl Default for NaiveBayesParams {
    fn default() -> Self {
        Self {
            var_smoothing: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// Per class, per feature.
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
    /// `None` for classes absent from the training data.
    log_priors: Vec<Option<f64>>,
}

impl Model for GaussianNb {
    fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let scores: Vec<f64> = self
            .log_priors
            .iter()
            .enumerate()
            .map(|(c, prior)| match prior {
                None => f64::NEG_INFINITY,
                Some(lp) => {
                    let ll: f64 = x
                        .iter()
                        .zip(self.means[c].iter().zip(&self.variances[c]))
                        .map(|(&v, (&m, &var))| {
                            -0.5 * (2.0 * std::f64::consts::PI * var).ln()
                                - (v - m) * (v - m) / (2.0 * var)
                        })
                        .sum();
                    lp + ll
                }
            })
            .collect();
        softmax(&scores)
    }

    fn payload(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("naive bayes serializes")
    }
}

fn mean_var(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

impl Classifier for NaiveBayesParams {
    fn name(&self) -> &'static str {
        "naive_bayes"
    }

    fn validate(&self) -> Result<(), ClassifierError> {
        if !(self.var_smoothing > 0.0) {
            return Err(ClassifierError::InvalidSpec(
                "var_smoothing must be positive".into(),
            ));
        }
        Ok(())
    }

    fn fit(&self, data: &TrainingSet<'_>) -> Result<Box<dyn Model>, ClassifierError> {
        let d = data.n_features();
        let n = data.len() as f64;
        let max_var = (0..d)
            .map(|j| mean_var(data.features.iter().map(move |r| r[j])).1)
            .fold(0.0, f64::max);
        let epsilon = self.var_smoothing * max_var.max(f64::MIN_POSITIVE);

        let mut means = vec![vec![0.0; d]; data.n_classes];
        let mut variances = vec![vec![1.0; d]; data.n_classes];
        let mut log_priors = vec![None; data.n_classes];
        for c in 0..data.n_classes {
            let rows: Vec<&Vec<f64>> = data
                .features
                .iter()
                .zip(data.labels)
                .filter(|(_, &l)| l == c)
                .map(|(r, _)| r)
                .collect();
            if rows.is_empty() {
                continue;
            }
            log_priors[c] = Some((rows.len() as f64 / n).ln());
            for j in 0..d {
                let (m, v) = mean_var(rows.iter().map(|r| r[j]));
                means[c][j] = m;
                variances[c][j] = v + epsilon;
            }
        }
        Ok(Box::new(GaussianNb {
            means,
            variances,
            log_priors,
        }))
    }

    fn decode(&self, payload: serde_json::Value) -> Result<Box<dyn Model>, serde_json::Error> {
        Ok(Box::new(serde_json::from_value::<GaussianNb>(payload)?))
    }
}
