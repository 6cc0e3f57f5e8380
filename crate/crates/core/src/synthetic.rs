//! Generated images and black boxes with known answers, for tests, the
//! acceptance suite and demos.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::explain::RasterImage;
use crate::predictor::{ImagePredictor, PredictorError, PredictorKind};

/// Class folders written by [`write_blob_dataset`].
pub const BLOB_CLASSES: [&str; 2] = ["green", "red"];

/// A square image of soil-coloured noise with one disk in the class hue.
pub fn blob_image(class: usize, seed: u64, size: u32) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = size as f64 * rng.gen_range(0.15..0.3);
    let cx = rng.gen_range(r..size as f64 - r);
    let cy = rng.gen_range(r..size as f64 - r);
    let hue: [i32; 3] = if class == 0 {
        [50, 170, 60]
    } else {
        [190, 50, 45]
    };
    let mut pixels = Vec::with_capacity((size * size) as usize);
    for y in 0..size {
        for x in 0..size {
            let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            let base = if dx * dx + dy * dy <= r * r {
                hue
            } else {
                [120, 100, 80]
            };
            pixels.push(base.map(|c| (c + rng.gen_range(-25..=25)).clamp(0, 255) as u8));
        }
    }
    RasterImage::from_fn(size, size, |x, y| pixels[(y * size + x) as usize])
}

/// Writes `per_class` PNGs for each of [`BLOB_CLASSES`] under `dir`.
pub fn write_blob_dataset(dir: &Path, per_class: usize, seed: u64) -> std::io::Result<()> {
    for (c, name) in BLOB_CLASSES.iter().enumerate() {
        let class_dir = dir.join(name);
        std::fs::create_dir_all(&class_dir)?;
        for i in 0..per_class {
            let img = blob_image(
                c,
                seed.wrapping_mul(1_000_003)
                    .wrapping_add((c * per_class + i) as u64),
                64,
            );
            let png = img.to_png().map_err(std::io::Error::other)?;
            std::fs::write(class_dir.join(format!("{i:04}.png")), png)?;
        }
    }
    Ok(())
}

/// `(x0, y0, x1, y1)`, half-open.
pub type Rect = (u32, u32, u32, u32);

/// Side of [`quadrant_image`].
pub const QUADRANT_SIZE: u32 = 224;
/// Region inside the lower-right quadrant that [`MarkedRegionPredictor`] watches.
pub const MARKED_REGION: Rect = (140, 140, 196, 196);

/// Four quadrants in distinct base colours with per-pixel texture.
pub fn quadrant_image() -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let bases = [[200, 60, 60], [60, 180, 70], [60, 80, 200], [210, 190, 70]];
    let half = QUADRANT_SIZE / 2;
    let mut noise = Vec::with_capacity((QUADRANT_SIZE * QUADRANT_SIZE) as usize);
    for _ in 0..QUADRANT_SIZE * QUADRANT_SIZE {
        noise.push([0; 3].map(|_: i32| rng.gen_range(-12..=12)));
    }
    RasterImage::from_fn(QUADRANT_SIZE, QUADRANT_SIZE, |x, y| {
        let q = usize::from(x >= half) + 2 * usize::from(y >= half);
        let n = noise[(y * QUADRANT_SIZE + x) as usize];
        [0, 1, 2].map(|c| (bases[q][c] + n[c]).clamp(0, 255) as u8)
    })
}

/// Five labels; the last one's probability is `0.1 + 0.8 * f`, where `f` is
/// the fraction of pixels in `region` still equal to the reference image.
/// The other four share the rest equally.
#[derive(Debug, Clone)]
pub struct MarkedRegionPredictor {
    reference: RasterImage,
    region: Rect,
    labels: Vec<String>,
}

impl MarkedRegionPredictor {
    pub const TARGET: usize = 4;

    pub fn new(reference: RasterImage, region: Rect) -> Self {
        Self {
            reference,
            region,
            labels: ["q0", "q1", "q2", "q3", "marked"]
                .map(String::from)
                .to_vec(),
        }
    }

    pub fn for_quadrants() -> Self {
        Self::new(quadrant_image(), MARKED_REGION)
    }
}

impl ImagePredictor for MarkedRegionPredictor {
    fn kind(&self) -> PredictorKind {
        PredictorKind::Stub
    }

    fn labels(&self) -> &[String] {
        &self.labels
    }

    fn predict_proba(&self, image: &RasterImage) -> Result<Vec<f64>, PredictorError> {
        if (image.width(), image.height()) != (self.reference.width(), self.reference.height()) {
            return Err(PredictorError::ProtocolViolation(
                "image size differs from the reference".into(),
            ));
        }
        let (x0, y0, x1, y1) = self.region;
        let w = self.reference.width();
        let mut same = 0usize;
        for y in y0..y1 {
            for x in x0..x1 {
                let i = (y * w + x) as usize;
                same += usize::from(image.pixel(i) == self.reference.pixel(i));
            }
        }
        let f = same as f64 / ((x1 - x0) * (y1 - y0)) as f64;
        let p = 0.1 + 0.8 * f;
        let mut probs = vec![(1.0 - p) / 4.0; 5];
        probs[Self::TARGET] = p;
        Ok(probs)
    }
}
