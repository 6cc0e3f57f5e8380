//! One-vs-rest support vector classifier with a polynomial kernel.
//!
//! Each binary head solves the soft-margin dual with sequential minimal
//! optimization, choosing working pairs by maximal violation with
//! second-order selection of the partner. A head stops when the largest KKT
//! violation `m(a) - M(a)` drops to `tolerance`. Head decision values are
//! turned into a distribution with a softmax over margins.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{softmax, Classifier, ClassifierError, Model, TrainingSet};

const TAU: f64 = 1e-12;

/// Margin offset of a head whose class had no training samples.
const ABSENT_CLASS_RHO: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialKernel {
    pub degree: i32,
    pub scale: f64,
    pub offset: f64,
}

impl Default for PolynomialKernel {
    fn default() -> Self {
        Self {
            degree: 3,
            scale: 1.0,
            offset: 1.0,
        }
    }
}

impl PolynomialKernel {
    /// `(scale * x.z + offset)^degree`
    pub fn eval(&self, x: &[f64], z: &[f64]) -> f64 {
        let dot: f64 = x.iter().zip(z).map(|(a, b)| a * b).sum();
        (self.scale * dot + self.offset).powi(self.degree)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub kernel: PolynomialKernel,
    pub tolerance: f64,
    /// One pass is `n_samples` pair updates.
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 3.0,
            kernel: PolynomialKernel::default(),
            tolerance: 1e-3,
            max_passes: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryHead {
    /// `(support vector index, alpha_i * y_i)`
    pub coefficients: Vec<(usize, f64)>,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    kernel: PolynomialKernel,
    support_vectors: Vec<Vec<f64>>,
    heads: Vec<BinaryHead>,
}

impl SvmModel {
    /// Raw margin of every one-vs-rest head.
    pub fn decision_values(&self, x: &[f64]) -> Vec<f64> {
        let k: Vec<f64> = self
            .support_vectors
            .iter()
            .map(|sv| self.kernel.eval(sv, x))
            .collect();
        self.heads
            .iter()
            .map(|h| h.coefficients.iter().map(|&(i, a)| a * k[i]).sum::<f64>() - h.rho)
            .collect()
    }
}

impl Model for SvmModel {
    fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.decision_values(x))
    }

    fn payload(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("svm serializes")
    }
}

/// Result of one binary SMO solve.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    /// Final `m(a) - M(a)`.
    pub max_violation: f64,
}

/// Solves `min 1/2 a'Qa - e'a` s.t. `0 <= a <= c`, `y'a = 0`, with
/// `Q_ij = y_i y_j K_ij`. `kernel` is the full row-major Gram matrix.
pub fn smo_solve(
    kernel: &[f64],
    y: &[f64],
    c: f64,
    tolerance: f64,
    max_iterations: usize,
) -> Result<SmoSolution, ClassifierError> {
    let n = y.len();
    let kij = |i: usize, j: usize| kernel[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let is_upper = |a: f64| a >= c;
    let is_lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    loop {
        // i: maximal violator in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = if y[t] > 0.0 {
                !is_upper(alpha[t])
            } else {
                !is_lower(alpha[t])
            };
            if in_up && v >= gmax {
                gmax = v;
                i_sel = Some(t);
            }
        }
        // j: second-order choice in I_low
        let mut gmin = f64::INFINITY;
        let mut j_sel = None;
        let mut best_obj = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                let in_low = if y[t] > 0.0 {
                    !is_lower(alpha[t])
                } else {
                    !is_upper(alpha[t])
                };
                if !in_low {
                    continue;
                }
                let v = -y[t] * grad[t];
                gmin = gmin.min(v);
                let b = gmax - v;
                if b > 0.0 {
                    let a = kij(i, i) + kij(t, t) - 2.0 * kij(i, t);
                    let a = if a > 0.0 { a } else { TAU };
                    let obj = -(b * b) / a;
                    if obj <= best_obj {
                        best_obj = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let violation = gmax - gmin;
        let (Some(i), Some(j)) = (i_sel, j_sel) else {
            return Ok(finish(alpha, &grad, y, c, iterations, violation.max(0.0)));
        };
        if violation <= tolerance {
            return Ok(finish(alpha, &grad, y, c, iterations, violation));
        }
        if iterations >= max_iterations {
            return Err(ClassifierError::NonConvergence {
                algorithm: "svm",
                iterations,
            });
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let q_ij = y[i] * y[j] * kij(i, j);
        let (qii, qjj) = (kij(i, i), kij(j, j));
        if y[i] != y[j] {
            let quad = (qii + qjj + 2.0 * q_ij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qii + qjj - 2.0 * q_ij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * kij(t, i) * di + y[j] * kij(t, j) * dj);
        }
    }
}

fn finish(
    alpha: Vec<f64>,
    grad: &[f64],
    y: &[f64],
    c: f64,
    iterations: usize,
    violation: f64,
) -> SmoSolution {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    SmoSolution {
        alpha,
        rho,
        iterations,
        max_violation: violation,
    }
}

impl Classifier for SvmParams {
    fn name(&self) -> &'static str {
        "svm"
    }

    fn validate(&self) -> Result<(), ClassifierError> {
        if !(self.c > 0.0)
            || !(self.tolerance > 0.0)
            || self.max_passes == 0
            || self.kernel.degree < 1
        {
            return Err(ClassifierError::InvalidSpec(
                "need C > 0, tolerance > 0, max_passes > 0, degree >= 1".into(),
            ));
        }
        Ok(())
    }

    fn requires_unit_scaling(&self) -> bool {
        true
    }

    fn fit(&self, data: &TrainingSet<'_>) -> Result<Box<dyn Model>, ClassifierError> {
        let n = data.len();
        let gram: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| self.kernel.eval(&data.features[i], &data.features[j]))
            .collect();
        let max_iterations = self.max_passes.saturating_mul(n);
        let solutions: Vec<Option<SmoSolution>> = (0..data.n_classes)
            .into_par_iter()
            .map(|class| {
                let y: Vec<f64> = data
                    .labels
                    .iter()
                    .map(|&l| if l == class { 1.0 } else { -1.0 })
                    .collect();
                if y.iter().all(|&v| v < 0.0) {
                    // class absent from this training set
                    return Ok(None);
                }
                smo_solve(&gram, &y, self.c, self.tolerance, max_iterations).map(Some)
            })
            .collect::<Result<_, _>>()?;

        let mut sv_index = vec![usize::MAX; n];
        let mut support_vectors = Vec::new();
        let mut heads = Vec::with_capacity(data.n_classes);
        for (class, sol) in solutions.into_iter().enumerate() {
            let Some(sol) = sol else {
                heads.push(BinaryHead {
                    coefficients: Vec::new(),
                    rho: ABSENT_CLASS_RHO,
                });
                continue;
            };
            let mut coefficients = Vec::new();
            for (t, &a) in sol.alpha.iter().enumerate() {
                if a > 0.0 {
                    if sv_index[t] == usize::MAX {
                        sv_index[t] = support_vectors.len();
                        support_vectors.push(data.features[t].clone());
                    }
                    let y = if data.labels[t] == class { 1.0 } else { -1.0 };
                    coefficients.push((sv_index[t], a * y));
                }
            }
            heads.push(BinaryHead {
                coefficients,
                rho: sol.rho,
            });
        }
        Ok(Box::new(SvmModel {
            kernel: self.kernel.clone(),
            support_vectors,
            heads,
        }))
    }

    fn decode(&self, payload: serde_json::Value) -> Result<Box<dyn Model>, serde_json::Error> {
        Ok(Box::new(serde_json::from_value::<SvmModel>(payload)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{ClassifierSpec, TrainedClassifier};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gram(x: &[Vec<f64>], k: &PolynomialKernel) -> Vec<f64> {
        x.iter()
            .flat_map(|a| x.iter().map(|b| k.eval(a, b)))
            .collect()
    }

    fn noisy_binary(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
            .collect();
        let y = x
            .iter()
            .map(|p| {
                let flip = rng.gen_bool(0.1);
                let pos = (p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2) < 0.1;
                if pos ^ flip {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        (x, y)
    }

    #[test]
    fn kernel_value() {
        let k = PolynomialKernel::default();
        assert_eq!(k.eval(&[1.0, 2.0], &[0.5, 0.25]), 8.0);
    }

    #[test]
    fn kkt_conditions_hold_at_exit() {
        let (x, y) = noisy_binary(1, 120);
        let k = PolynomialKernel::default();
        let g = gram(&x, &k);
        let c = 3.0;
        let sol = smo_solve(&g, &y, c, 1e-3, 1_000_000).unwrap();
        assert!(sol.max_violation <= 1e-3);
        // equality constraint and box
        let eq: f64 = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(eq.abs() < 1e-9, "{eq}");
        assert!(sol.alpha.iter().all(|&a| (0.0..=c).contains(&a)));
        // recompute the gradient from scratch and check violation independently
        let n = y.len();
        let grad: Vec<f64> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| y[i] * y[j] * g[i * n + j] * sol.alpha[j])
                    .sum::<f64>()
                    - 1.0
            })
            .collect();
        let m_up = (0..n)
            .filter(|&t| {
                if y[t] > 0.0 {
                    sol.alpha[t] < c
                } else {
                    sol.alpha[t] > 0.0
                }
            })
            .map(|t| -y[t] * grad[t])
            .fold(f64::NEG_INFINITY, f64::max);
        let m_low = (0..n)
            .filter(|&t| {
                if y[t] > 0.0 {
                    sol.alpha[t] > 0.0
                } else {
                    sol.alpha[t] < c
                }
            })
            .map(|t| -y[t] * grad[t])
            .fold(f64::INFINITY, f64::min);
        assert!(m_up - m_low <= 1e-3 + 1e-9);
    }

    #[test]
    fn iteration_cap_raises_non_convergence() {
        let (x, y) = noisy_binary(2, 80);
        let g = gram(&x, &PolynomialKernel::default());
        assert!(matches!(
            smo_solve(&g, &y, 1e3, 1e-12, 5),
            Err(ClassifierError::NonConvergence { iterations: 5, .. })
        ));
    }

    #[test]
    fn separates_three_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let centers = [(0.0, 0.0), (5.0, 5.0), (0.0, 10.0)];
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..90 {
            let (cx, cy) = centers[i % 3];
            x.push(vec![
                cx + rng.gen_range(-1.0..1.0),
                cy + rng.gen_range(-1.0..1.0),
            ]);
            y.push(["a", "b", "c"][i % 3]);
        }
        let m =
            TrainedClassifier::train(&ClassifierSpec::Svm(SvmParams::default()), &x, &y).unwrap();
        let correct = x
            .iter()
            .zip(&y)
            .filter(|(xi, yi)| m.predict(xi).unwrap() == **yi)
            .count();
        assert_eq!(correct, 90);
        assert!(m.scaler().is_some());
    }
}
