//! LIME-style explanations for image classifiers.
//!
//! The image is cut into SLIC superpixels; random subsets of superpixels are
//! hidden, the black box is queried on each perturbed copy, and a weighted
//! ridge regression on the keep/drop masks gives one score per superpixel.

mod image;
mod lime;
mod overlay;
mod ridge;
mod slic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::image::{ImageError, ImageKind, RasterImage};
pub use lime::{
    apply_mask, cosine_distance, explain, kernel_weight, rank_positive, sample_masks,
    segment_means, FillPolicy, LimeConfig, LimeOutcome,
};
pub use overlay::{render_overlay, OUTLINE, TINT, TINT_ALPHA};
pub use ridge::{fit_surrogate, Surrogate};
pub use slic::{slic_segment, SegmentMap, SlicParams};

use crate::predictor::PredictorError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplainError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("{requested} segments requested for an image of {pixels} pixels")]
    TooManySegments { requested: usize, pixels: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("image is {image:?} but segment map is {segments:?}")]
    DimensionMismatch {
        image: (u32, u32),
        segments: (u32, u32),
    },
    #[error("all-zero mask has no cosine distance to the reference")]
    DegenerateMask,
    #[error("surrogate normal equations are singular")]
    SingularSystem,
    #[error("explanation covers {found} segments but the map has {expected}")]
    InconsistentSegmentCount { expected: usize, found: usize },
    #[error("predictor failed on sample {sample}: {source}")]
    Predictor {
        sample: usize,
        source: PredictorError,
    },
    #[error("time budget exceeded after {completed} predictions")]
    DeadlineExceeded { completed: usize },
}

/// Surrogate result for one image and target class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub target_class: usize,
    /// One signed score per segment.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Positive-score segments, best first, at most `top_k`.
    pub top_segments: Vec<usize>,
    pub n_samples: usize,
    pub seed: u64,
    /// Sampled all-zero masks, weighted with the `d = 1` convention.
    pub degenerate_masks: usize,
}

impl Explanation {
    /// `(segment id, score)` for the ranked segments.
    pub fn ranked_scores(&self) -> Vec<(usize, f64)> {
        self.top_segments
            .iter()
            .map(|&s| (s, self.coefficients[s]))
            .collect()
    }
}
