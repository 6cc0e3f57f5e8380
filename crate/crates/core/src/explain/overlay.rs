//! Highlight rendering for explanation results.

use super::image::RasterImage;
use super::slic::SegmentMap;
use super::{ExplainError, Explanation};

pub const TINT: [u8; 3] = [0, 255, 0];
pub const TINT_ALPHA: f64 = 0.35;
pub const OUTLINE: [u8; 3] = [255, 255, 0];

/// Blends the top segments towards green and outlines their inner boundary
/// in yellow. Pixels outside the top segments are untouched.
pub fn render_overlay(
    image: &RasterImage,
    segments: &SegmentMap,
    explanation: &Explanation,
) -> Result<RasterImage, ExplainError> {
    if image.width() != segments.width() || image.height() != segments.height() {
        return Err(ExplainError::DimensionMismatch {
            image: (image.width(), image.height()),
            segments: (segments.width(), segments.height()),
        });
    }
    if explanation.coefficients.len() != segments.segment_count() {
        return Err(ExplainError::InconsistentSegmentCount {
            expected: segments.segment_count(),
            found: explanation.coefficients.len(),
        });
    }
    if let Some(&bad) = explanation
        .top_segments
        .iter()
        .find(|&&s| s >= segments.segment_count())
    {
        return Err(ExplainError::InconsistentSegmentCount {
            expected: segments.segment_count(),
            found: bad + 1,
        });
    }
    let mut highlighted = vec![false; segments.segment_count()];
    for &s in &explanation.top_segments {
        highlighted[s] = true;
    }
    let mut out = image.clone();
    for i in 0..image.pixel_count() {
        if !highlighted[segments.label(i)] {
            continue;
        }
        let px = if segments.is_boundary(i) {
            OUTLINE
        } else {
            let p = image.pixel(i);
            [0, 1, 2].map(|c| {
                ((1.0 - TINT_ALPHA) * p[c] as f64 + TINT_ALPHA * TINT[c] as f64).round() as u8
            })
        };
        out.set_pixel(i, px);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn explanation(coefficients: Vec<f64>, top: Vec<usize>) -> Explanation {
        Explanation {
            target_class: 0,
            coefficients,
            intercept: 0.0,
            top_segments: top,
            n_samples: 1,
            seed: 0,
            degenerate_masks: 0,
        }
    }

    #[test]
    fn empty_top_k_is_identity() {
        let img = RasterImage::filled(5, 5, [1, 2, 3]);
        let seg = SegmentMap::from_labels(5, 5, &[0; 25]).unwrap();
        assert_eq!(
            render_overlay(&img, &seg, &explanation(vec![-1.0], vec![])).unwrap(),
            img
        );
    }

    #[test]
    fn single_segment_fully_tinted() {
        let img = RasterImage::filled(5, 5, [100, 100, 100]);
        let seg = SegmentMap::from_labels(5, 5, &[0; 25]).unwrap();
        let out = render_overlay(&img, &seg, &explanation(vec![1.0], vec![0])).unwrap();
        assert!(out.pixels().all(|p| p == [65, 154, 65]));
    }

    #[test]
    fn changed_pixels_match_highlighted_area() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (w, h) = (rng.gen_range(2..20u32), rng.gen_range(2..20u32));
            let img = RasterImage::from_fn(w, h, |_, _| {
                [
                    rng.gen_range(1..250),
                    rng.gen_range(1..250),
                    rng.gen_range(1..250),
                ]
            });
            let raw: Vec<u32> = (0..w * h).map(|_| rng.gen_range(0..6)).collect();
            let seg = SegmentMap::from_labels(w, h, &raw).unwrap();
            let s = seg.segment_count();
            let top: Vec<usize> = (0..s).filter(|_| rng.gen_bool(0.5)).collect();
            let out = render_overlay(&img, &seg, &explanation(vec![1.0; s], top.clone())).unwrap();
            let changed = img
                .pixels()
                .zip(out.pixels())
                .filter(|(a, b)| a != b)
                .count();
            let counts = seg.pixel_counts();
            let expected: usize = top.iter().map(|&t| counts[t]).sum();
            assert_eq!(changed, expected);
        }
    }

    #[test]
    fn segment_count_mismatch() {
        let img = RasterImage::filled(2, 1, [0; 3]);
        let seg = SegmentMap::from_labels(2, 1, &[0, 1]).unwrap();
        assert!(matches!(
            render_overlay(&img, &seg, &explanation(vec![1.0], vec![0])),
            Err(ExplainError::InconsistentSegmentCount {
                expected: 2,
                found: 1
            })
        ));
    }
}
