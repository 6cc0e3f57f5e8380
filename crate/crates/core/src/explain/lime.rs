//! Perturbation sampling, locality weighting and the explanation pipeline.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::image::RasterImage;
use super::ridge::fit_surrogate;
use super::slic::{slic_segment, SegmentMap, SlicParams};
use super::{ExplainError, Explanation};
use crate::predictor::{ImagePredictor, PredictorError};

/// How dropped segments are painted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillPolicy {
    /// The segment's own mean colour in the unperturbed image.
    #[default]
    SegmentMean,
    /// Solid (128, 128, 128).
    Gray,
}

/// First mask is all ones, the rest are i.i.d. Bernoulli(0.5).
pub fn sample_masks(
    segment_count: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<Vec<bool>>, ExplainError> {
    if segment_count == 0 || n_samples == 0 {
        return Err(ExplainError::InvalidParameter(format!(
            "need at least one segment and one sample (got {segment_count}, {n_samples})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut masks = Vec::with_capacity(n_samples);
    masks.push(vec![true; segment_count]);
    for _ in 1..n_samples {
        masks.push((0..segment_count).map(|_| rng.gen_bool(0.5)).collect());
    }
    Ok(masks)
}

/// Per-segment mean colour, rounded to nearest.
pub fn segment_means(image: &RasterImage, segments: &SegmentMap) -> Vec<[u8; 3]> {
    let mut sums = vec![[0u64; 4]; segments.segment_count()];
    for (i, px) in image.pixels().enumerate() {
        let s = &mut sums[segments.label(i)];
        s[0] += px[0] as u64;
        s[1] += px[1] as u64;
        s[2] += px[2] as u64;
        s[3] += 1;
    }
    sums.iter()
        .map(|s| {
            let n = s[3].max(1);
            [0, 1, 2].map(|c| ((s[c] + n / 2) / n) as u8)
        })
        .collect()
}

fn check_dims(image: &RasterImage, segments: &SegmentMap) -> Result<(), ExplainError> {
    if image.width() != segments.width() || image.height() != segments.height() {
        return Err(ExplainError::DimensionMismatch {
            image: (image.width(), image.height()),
            segments: (segments.width(), segments.height()),
        });
    }
    Ok(())
}

pub fn apply_mask(
    image: &RasterImage,
    segments: &SegmentMap,
    mask: &[bool],
    fill: FillPolicy,
) -> Result<RasterImage, ExplainError> {
    check_dims(image, segments)?;
    let fills = match fill {
        FillPolicy::SegmentMean => segment_means(image, segments),
        FillPolicy::Gray => vec![[128; 3]; segments.segment_count()],
    };
    apply_mask_with(image, segments, mask, &fills)
}

fn apply_mask_with(
    image: &RasterImage,
    segments: &SegmentMap,
    mask: &[bool],
    fills: &[[u8; 3]],
) -> Result<RasterImage, ExplainError> {
    if mask.len() != segments.segment_count() {
        return Err(ExplainError::LengthMismatch {
            expected: segments.segment_count(),
            found: mask.len(),
        });
    }
    let mut out = image.clone();
    for i in 0..image.pixel_count() {
        let s = segments.label(i);
        if !mask[s] {
            out.set_pixel(i, fills[s]);
        }
    }
    Ok(out)
}

/// Cosine distance between `mask` and the all-ones vector:
/// `1 - sqrt(kept / S)`.
pub fn cosine_distance(mask: &[bool]) -> Result<f64, ExplainError> {
    let kept = mask.iter().filter(|&&m| m).count();
    if kept == 0 {
        return Err(ExplainError::DegenerateMask);
    }
    Ok(1.0 - (kept as f64 / mask.len() as f64).sqrt())
}

/// `exp(-d^2 / width^2)`. An all-zero mask is [`ExplainError::DegenerateMask`];
/// the pipeline then uses `d = 1`.
pub fn kernel_weight(mask: &[bool], width: f64) -> Result<f64, ExplainError> {
    let d = cosine_distance(mask)?;
    Ok((-d * d / (width * width)).exp())
}

/// Everything [`explain`] needs besides the image and the black box.
#[derive(Debug, Clone)]
pub struct LimeConfig {
    pub n_samples: usize,
    pub top_k: usize,
    pub seed: u64,
    pub l2: f64,
    pub kernel_width: f64,
    pub slic: SlicParams,
    pub fill: FillPolicy,
    /// Abort with [`ExplainError::DeadlineExceeded`] once passed.
    pub deadline: Option<Instant>,
    /// Evaluate perturbed images on the rayon pool.
    pub parallel: bool,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            top_k: 10,
            seed: 0,
            l2: 1.0,
            kernel_width: 0.25,
            slic: SlicParams::default(),
            fill: FillPolicy::SegmentMean,
            deadline: None,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimeOutcome {
    pub segments: SegmentMap,
    pub explanation: Explanation,
}

/// Predictions are evaluated in chunks so a failure or deadline stops work
/// early while still reporting the lowest failing sample index.
const CHUNK: usize = 64;

pub fn explain(
    image: &RasterImage,
    predictor: &dyn ImagePredictor,
    target_class: usize,
    config: &LimeConfig,
) -> Result<LimeOutcome, ExplainError> {
    let n_labels = predictor.labels().len();
    if target_class >= n_labels {
        return Err(ExplainError::InvalidParameter(format!(
            "target class {target_class} out of range for {n_labels} labels"
        )));
    }
    if !(config.kernel_width > 0.0) || !config.kernel_width.is_finite() {
        return Err(ExplainError::InvalidParameter(format!(
            "kernel width must be positive (got {})",
            config.kernel_width
        )));
    }
    let segments = slic_segment(image, &config.slic)?;
    let masks = sample_masks(segments.segment_count(), config.n_samples, config.seed)?;
    let fills = match config.fill {
        FillPolicy::SegmentMean => segment_means(image, &segments),
        FillPolicy::Gray => vec![[128; 3]; segments.segment_count()],
    };

    let expired = AtomicBool::new(false);
    let evaluate = |index: usize| -> Result<f64, ExplainError> {
        if expired.load(Ordering::Relaxed) || config.deadline.is_some_and(|d| Instant::now() >= d) {
            expired.store(true, Ordering::Relaxed);
            return Err(ExplainError::DeadlineExceeded { completed: index });
        }
        let perturbed = apply_mask_with(image, &segments, &masks[index], &fills)?;
        let probs =
            predictor
                .predict_proba(&perturbed)
                .map_err(|source| ExplainError::Predictor {
                    sample: index,
                    source,
                })?;
        if probs.len() != n_labels {
            return Err(ExplainError::Predictor {
                sample: index,
                source: PredictorError::ProtocolViolation(format!(
                    "{} probabilities for {} labels",
                    probs.len(),
                    n_labels
                )),
            });
        }
        Ok(probs[target_class])
    };

    let mut targets = Vec::with_capacity(masks.len());
    for start in (0..masks.len()).step_by(CHUNK) {
        let range = start..(start + CHUNK).min(masks.len());
        let chunk: Vec<Result<f64, ExplainError>> = if config.parallel {
            range.into_par_iter().map(evaluate).collect()
        } else {
            range.map(evaluate).collect()
        };
        for r in chunk {
            match r {
                Ok(y) => targets.push(y),
                Err(ExplainError::DeadlineExceeded { .. }) => {
                    return Err(ExplainError::DeadlineExceeded {
                        completed: targets.len(),
                    })
                }
                Err(e) => return Err(e),
            }
        }
    }

    let mut degenerate = 0;
    let fallback = (-1.0 / (config.kernel_width * config.kernel_width)).exp();
    let weights: Vec<f64> = masks
        .iter()
        .map(|m| match kernel_weight(m, config.kernel_width) {
            Ok(w) => w,
            Err(_) => {
                degenerate += 1;
                fallback
            }
        })
        .collect();

    let fit = fit_surrogate(&masks, &weights, &targets, config.l2)?;
    let top_segments = rank_positive(&fit.coefficients, config.top_k);
    Ok(LimeOutcome {
        explanation: Explanation {
            target_class,
            coefficients: fit.coefficients,
            intercept: fit.intercept,
            top_segments,
            n_samples: config.n_samples,
            seed: config.seed,
            degenerate_masks: degenerate,
        },
        segments,
    })
}

/// Ids of strictly positive coefficients, largest first (ties by id),
/// truncated to `k`.
pub fn rank_positive(coefficients: &[f64], k: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..coefficients.len())
        .filter(|&i| coefficients[i] > 0.0)
        .collect();
    ids.sort_by(|&a, &b| coefficients[b].total_cmp(&coefficients[a]).then(a.cmp(&b)));
    ids.truncate(k);
    ids
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_tone() -> (RasterImage, SegmentMap) {
        let img = RasterImage::from_fn(
            6,
            4,
            |x, _| if x < 2 { [10, 20, 30] } else { [200, 100, 0] },
        );
        let labels: Vec<u32> = (0..24).map(|i| u32::from(i % 6 >= 2)).collect();
        (img, SegmentMap::from_labels(6, 4, &labels).unwrap())
    }

    #[test]
    fn reference_mask_first() {
        assert_eq!(sample_masks(3, 1, 9).unwrap(), vec![vec![true; 3]]);
    }

    #[test]
    fn masks_are_seeded_and_balanced() {
        let a = sample_masks(8, 1000, 42).unwrap();
        assert_eq!(a, sample_masks(8, 1000, 42).unwrap());
        assert_ne!(a, sample_masks(8, 1000, 43).unwrap());
        let ones = a.iter().flatten().filter(|&&b| b).count() as f64 / 8000.0;
        assert!((0.45..=0.55).contains(&ones), "{ones}");
    }

    #[test]
    fn masking_rules() {
        let (img, seg) = two_tone();
        assert_eq!(
            apply_mask(&img, &seg, &[true, true], FillPolicy::SegmentMean).unwrap(),
            img
        );
        let gray = apply_mask(&img, &seg, &[false, false], FillPolicy::Gray).unwrap();
        assert!(gray.pixels().all(|p| p == [128; 3]));
        // mean of a constant region is itself
        assert_eq!(
            apply_mask(&img, &seg, &[false, true], FillPolicy::SegmentMean).unwrap(),
            img
        );
        assert_eq!(
            apply_mask(&img, &seg, &[true], FillPolicy::Gray),
            Err(ExplainError::LengthMismatch {
                expected: 2,
                found: 1
            })
        );
    }

    #[test]
    fn kernel_closed_form() {
        assert_eq!(kernel_weight(&[true; 5], 0.25).unwrap(), 1.0);
        let d = 1.0 - 2f64.sqrt() / 2.0;
        let w = kernel_weight(&[true, true, false, false], 0.25).unwrap();
        assert!((w - (-d * d / 0.0625).exp()).abs() < 1e-15);
        assert!((w - 0.2534).abs() < 1e-4);
        assert_eq!(
            kernel_weight(&[false; 3], 0.25),
            Err(ExplainError::DegenerateMask)
        );
    }

    #[test]
    fn kernel_monotone_over_exhaustive_masks() {
        for s in 1..=10usize {
            for bits in 1u32..(1 << s) {
                let mask: Vec<bool> = (0..s).map(|j| bits >> j & 1 == 1).collect();
                let w = kernel_weight(&mask, 0.25).unwrap();
                assert!(w > 0.0 && w <= 1.0);
                for j in 0..s {
                    if mask[j] && bits.count_ones() > 1 {
                        let mut fewer = mask.clone();
                        fewer[j] = false;
                        assert!(kernel_weight(&fewer, 0.25).unwrap() <= w);
                    }
                }
            }
        }
    }

    #[test]
    fn ranking_keeps_positive_only() {
        assert_eq!(
            rank_positive(&[0.1, -2.0, 0.5, 0.0, 0.5], 10),
            vec![2, 4, 0]
        );
        assert_eq!(rank_positive(&[0.1, 0.3], 1), vec![1]);
        assert!(rank_positive(&[0.1], 0).is_empty());
    }
}
