use serde::{Deserialize, Serialize};

use super::TabularError;

/// Per-feature min/max observed on a fitting set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn fit_minmax(samples: &[Vec<f64>]) -> Result<ScalerParams, TabularError> {
    let first = samples.first().ok_or(TabularError::EmptyFitSet)?;
    let mut min = first.clone();
    let mut max = first.clone();
    for row in &samples[1..] {
        for (j, &v) in row.iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    Ok(ScalerParams { min, max })
}

impl ScalerParams {
    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// `(x - min) / (max - min)`; constant features map to 0 and values
    /// outside the fitted range extrapolate linearly.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| {
                let range = hi - lo;
                if range > 0.0 {
                    (v - lo) / range
                } else {
                    0.0
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn midpoint() {
        let p = fit_minmax(&[vec![0.0], vec![10.0]]).unwrap();
        assert_eq!(p.apply(&[5.0]), vec![0.5]);
    }

    #[test]
    fn constant_feature_maps_to_zero() {
        let p = fit_minmax(&[vec![3.0], vec![3.0]]).unwrap();
        assert_eq!(p.apply(&[3.0]), vec![0.0]);
    }

    #[test]
    fn out_of_range_extrapolates() {
        let p = fit_minmax(&[vec![0.0], vec![10.0]]).unwrap();
        assert_eq!(p.apply(&[20.0]), vec![2.0]);
    }

    #[test]
    fn empty_fit_set() {
        assert_eq!(fit_minmax(&[]), Err(TabularError::EmptyFitSet));
    }

    proptest! {
        #[test]
        fn matches_closed_form(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 1..20),
                               x in prop::collection::vec(-2e3f64..2e3, 3)) {
            let p = fit_minmax(&rows).unwrap();
            let out = p.apply(&x);
            for j in 0..3 {
                let lo = rows.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
                let hi = rows.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(hi >= lo);
                if hi > lo {
                    prop_assert_eq!(out[j], (x[j] - lo) / (hi - lo));
                }
            }
            for r in &rows {
                for v in p.apply(r) {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}
