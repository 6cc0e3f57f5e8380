//! Multinomial logistic regression trained by full-batch gradient descent.
//!
//! Objective: `(1/n) * [sum_i CE_i + (lambda/2) * ||W||^2]`, intercepts
//! unpenalized. Scaling the penalty by `1/n` makes `lambda` play the role of
//! the inverse regularization strength `1/C` of common toolkits. Inputs are
//! standardized with statistics stored in the model.

use serde::{Deserialize, Serialize};

use super::{softmax, Classifier, ClassifierError, Model, TrainingSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub l2: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Stop once the relative loss decrease of an epoch falls below this.
    pub tolerance: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            l2: 1.0,
            learning_rate: 1.0,
            max_epochs: 10_000,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    mean: Vec<f64>,
    std: Vec<f64>,
    /// `weights[c][j]`
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl LogisticModel {
    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    fn scores(&self, z: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| b + w.iter().zip(z).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }
}

impl Model for LogisticModel {
    fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.scores(&self.standardize(x)))
    }

    fn payload(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("logistic model serializes")
    }
}

impl LogisticParams {
    /// Trains and returns the per-epoch objective values (first entry is the
    /// objective at initialization).
    pub fn fit_with_history(
        &self,
        data: &TrainingSet<'_>,
    ) -> Result<(LogisticModel, Vec<f64>), ClassifierError> {
        let d = data.n_features();
        let k = data.n_classes;
        let n = data.len() as f64;
        let mut mean = vec![0.0; d];
        let mut std = vec![0.0; d];
        for j in 0..d {
            mean[j] = data.features.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = data
                .features
                .iter()
                .map(|r| (r[j] - mean[j]).powi(2))
                .sum::<f64>()
                / n;
            std[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        let mut model = LogisticModel {
            mean,
            std,
            weights: vec![vec![0.0; d]; k],
            bias: vec![0.0; k],
        };
        let z: Vec<Vec<f64>> = data.features.iter().map(|x| model.standardize(x)).collect();

        let objective =
            |m: &LogisticModel, grad: Option<(&mut Vec<Vec<f64>>, &mut Vec<f64>)>| -> f64 {
                let mut loss = 0.0;
                let mut g = grad;
                for (zi, &yi) in z.iter().zip(data.labels) {
                    let p = softmax(&m.scores(zi));
                    loss -= p[yi].max(f64::MIN_POSITIVE).ln();
                    if let Some((gw, gb)) = g.as_mut() {
                        for c in 0..k {
                            let r = p[c] - if c == yi { 1.0 } else { 0.0 };
                            gb[c] += r;
                            for (gwj, zj) in gw[c].iter_mut().zip(zi) {
                                *gwj += r * zj;
                            }
                        }
                    }
                }
                let penalty: f64 = m.weights.iter().flatten().map(|w| w * w).sum();
                (loss + 0.5 * self.l2 * penalty) / n
            };

        // each pass evaluates the loss at the current weights together with
        // its gradient, so the loss after step e is computed in pass e + 1
        let mut history = Vec::new();
        let mut gw = vec![vec![0.0; d]; k];
        let mut gb = vec![0.0; k];
        for epoch in 0..=self.max_epochs {
            gw.iter_mut().for_each(|g| g.fill(0.0));
            gb.fill(0.0);
            let loss = objective(&model, Some((&mut gw, &mut gb)));
            if let Some(&prev) = history.last() {
                history.push(loss);
                if !loss.is_finite() {
                    return Err(ClassifierError::NonConvergence {
                        algorithm: "logistic_regression",
                        iterations: epoch,
                    });
                }
                if (prev - loss).abs() <= self.tolerance * f64::max(prev.abs(), 1.0) {
                    return Ok((model, history));
                }
            } else {
                history.push(loss);
            }
            if epoch == self.max_epochs {
                break;
            }
            for c in 0..k {
                for j in 0..d {
                    let g = (gw[c][j] + self.l2 * model.weights[c][j]) / n;
                    model.weights[c][j] -= self.learning_rate * g;
                }
                model.bias[c] -= self.learning_rate * gb[c] / n;
            }
        }
        Err(ClassifierError::NonConvergence {
            algorithm: "logistic_regression",
            iterations: self.max_epochs,
        })
    }
}

impl Classifier for LogisticParams {
    fn name(&self) -> &'static str {
        "logistic_regression"
    }

    fn validate(&self) -> Result<(), ClassifierError> {
        if !(self.l2 >= 0.0)
            || !(self.learning_rate > 0.0)
            || !(self.tolerance > 0.0)
            || self.max_epochs == 0
        {
            return Err(ClassifierError::InvalidSpec(
                "need l2 >= 0, learning_rate > 0, tolerance > 0, max_epochs > 0".into(),
            ));
        }
        Ok(())
    }

    fn fit(&self, data: &TrainingSet<'_>) -> Result<Box<dyn Model>, ClassifierError> {
        Ok(Box::new(self.fit_with_history(data)?.0))
    }

    fn decode(&self, payload: serde_json::Value) -> Result<Box<dyn Model>, serde_json::Error> {
        Ok(Box::new(serde_json::from_value::<LogisticModel>(payload)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..90 {
            let c = i % 3;
            let t = i as f64 * 0.37;
            x.push(vec![
                c as f64 * 3.0 + t.sin(),
                (c as f64 - 1.0) * 2.0 + t.cos(),
            ]);
            y.push(c);
        }
        (x, y)
    }

    #[test]
    fn loss_non_increasing_and_fits() {
        let (x, y) = blobs();
        let data = TrainingSet {
            features: &x,
            labels: &y,
            n_classes: 3,
        };
        let (model, history) = LogisticParams::default().fit_with_history(&data).unwrap();
        for w in history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "loss rose: {} -> {}", w[0], w[1]);
        }
        let correct = x
            .iter()
            .zip(&y)
            .filter(|(xi, &yi)| super::super::argmax(&model.predict_proba(xi)) == yi)
            .count();
        assert!(correct >= 85, "{correct}/90");
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let (x, y) = blobs();
        let data = TrainingSet {
            features: &x,
            labels: &y,
            n_classes: 3,
        };
        let params = LogisticParams {
            max_epochs: 3,
            tolerance: 1e-15,
            ..Default::default()
        };
        assert_eq!(
            params.fit_with_history(&data).unwrap_err(),
            ClassifierError::NonConvergence {
                algorithm: "logistic_regression",
                iterations: 3
            }
        );
    }
}
