//! Weighted ridge regression on binary masks, solved by the normal
//! equations with a Cholesky factorisation.

use super::ExplainError;

/// Relative pivot threshold below which the system counts as singular.
const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

/// Minimises `sum_i w_i (y_i - beta . m_i - beta_0)^2 + l2 * |beta|^2`.
/// The intercept is not penalised.
pub fn fit_surrogate(
    masks: &[Vec<bool>],
    weights: &[f64],
    targets: &[f64],
    l2: f64,
) -> Result<Surrogate, ExplainError> {
    if masks.len() != weights.len() || masks.len() != targets.len() {
        return Err(ExplainError::LengthMismatch {
            expected: masks.len(),
            found: if masks.len() != weights.len() {
                weights.len()
            } else {
                targets.len()
            },
        });
    }
    let s = masks.first().map_or(0, Vec::len);
    if masks.is_empty() || s == 0 {
        return Err(ExplainError::InvalidParameter(
            "surrogate needs at least one non-empty mask".into(),
        ));
    }
    if let Some(m) = masks.iter().find(|m| m.len() != s) {
        return Err(ExplainError::LengthMismatch {
            expected: s,
            found: m.len(),
        });
    }
    if !(l2 >= 0.0) || !l2.is_finite() {
        return Err(ExplainError::InvalidParameter(format!(
            "l2 must be finite and >= 0 (got {l2})"
        )));
    }

    // unknowns: [beta_0, beta_1..beta_s]
    let d = s + 1;
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    let mut active = Vec::with_capacity(d);
    for ((m, &w), &y) in masks.iter().zip(weights).zip(targets) {
        active.clear();
        active.push(0);
        active.extend(
            m.iter()
                .enumerate()
                .filter(|(_, &on)| on)
                .map(|(j, _)| j + 1),
        );
        for (ii, &i) in active.iter().enumerate() {
            b[i] += w * y;
            for &j in &active[ii..] {
                a[i * d + j] += w;
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            a[i * d + j] = a[j * d + i];
        }
    }
    for i in 1..d {
        a[i * d + i] += l2;
    }

    cholesky_factor(&mut a, d)?;
    let mut x = b.clone();
    cholesky_substitute(&a, &mut x, d);
    // Kernel weights span many orders of magnitude, so the normal equations
    // are poorly conditioned. A few refinement steps with the residual taken
    // from the data rather than the accumulated matrix recover full precision.
    for _ in 0..REFINEMENT_STEPS {
        let mut r = vec![0.0; d];
        for ((m, &w), &y) in masks.iter().zip(weights).zip(targets) {
            let fitted = x[0]
                + m.iter()
                    .zip(&x[1..])
                    .filter(|(on, _)| **on)
                    .map(|(_, c)| c)
                    .sum::<f64>();
            let e = w * (y - fitted);
            r[0] += e;
            for (j, _) in m.iter().enumerate().filter(|(_, &on)| on) {
                r[j + 1] += e;
            }
        }
        for i in 1..d {
            r[i] -= l2 * x[i];
        }
        cholesky_substitute(&a, &mut r, d);
        for (xi, ri) in x.iter_mut().zip(&r) {
            *xi += ri;
        }
    }
    Ok(Surrogate {
        intercept: x[0],
        coefficients: x[1..].to_vec(),
    })
}

const REFINEMENT_STEPS: usize = 3;

/// Overwrites the lower triangle of the symmetric positive definite `a`
/// (row-major, `d x d`) with its Cholesky factor.
fn cholesky_factor(a: &mut [f64], d: usize) -> Result<(), ExplainError> {
    let scale = (0..d).map(|i| a[i * d + i].abs()).fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(ExplainError::SingularSystem);
    }
    for j in 0..d {
        let mut diag = a[j * d + j];
        for k in 0..j {
            diag -= a[j * d + k] * a[j * d + k];
        }
        if !(diag > PIVOT_TOLERANCE * scale) {
            return Err(ExplainError::SingularSystem);
        }
        let l = diag.sqrt();
        a[j * d + j] = l;
        for i in j + 1..d {
            let mut v = a[i * d + j];
            for k in 0..j {
                v -= a[i * d + k] * a[j * d + k];
            }
            a[i * d + j] = v / l;
        }
    }
    Ok(())
}

/// Solves `L L^T x = b` in place given the factor from [`cholesky_factor`].
fn cholesky_substitute(l: &[f64], b: &mut [f64], d: usize) {
    for i in 0..d {
        let mut v = b[i];
        for k in 0..i {
            v -= l[i * d + k] * b[k];
        }
        b[i] = v / l[i * d + i];
    }
    for i in (0..d).rev() {
        let mut v = b[i];
        for k in i + 1..d {
            v -= l[k * d + i] * b[k];
        }
        b[i] = v / l[i * d + i];
    }
}
