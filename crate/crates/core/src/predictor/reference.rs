//! Linear softmax classifier over downsampled pixels.
//!
//! Images are resized to `size x size`, scaled by `1/scale` and flattened;
//! a multinomial logistic regression is trained by mini-batch gradient
//! descent from zero weights. Sample order depends only on file contents and
//! the seed, never on class names, so renaming folders permutes the outputs
//! and nothing else.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{validate_labels, ImagePredictor, PredictorError, PredictorKind};
use crate::artifact;
use crate::classifiers::softmax;
use crate::explain::RasterImage;

const ARTIFACT_KIND: &str = "reference_predictor";
const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTrainingConfig {
    /// Side length of the square the images are resized to.
    pub size: u32,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Pixel values are divided by this.
    pub scale: f64,
}

impl Default for ReferenceTrainingConfig {
    fn default() -> Self {
        Self {
            size: 32,
            learning_rate: 0.1,
            epochs: 30,
            batch_size: 32,
            seed: 0,
            scale: 255.0,
        }
    }
}

impl ReferenceTrainingConfig {
    fn validate(&self) -> Result<(), PredictorError> {
        if self.size == 0
            || self.epochs == 0
            || self.batch_size == 0
            || !(self.learning_rate > 0.0)
            || !(self.scale > 0.0)
        {
            return Err(PredictorError::InvalidConfig(
                "size, learning rate, epochs, batch size and scale must all be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Decoded training images with sorted class names.
#[derive(Debug, Clone)]
pub struct LabeledImages {
    pub labels: Vec<String>,
    /// `(class index, content digest, image)`, ordered by digest.
    pub samples: Vec<(usize, [u8; 32], RasterImage)>,
}

/// Reads `dir/<class>/<image>` for every subfolder. Non-image files are
/// skipped; image files that fail to decode are an error.
pub fn load_labeled_images(dir: &Path) -> Result<LabeledImages, PredictorError> {
    let io = |path: &Path, e: std::io::Error| PredictorError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut classes: Vec<(String, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| io(dir, e))? {
        let entry = entry.map_err(|e| io(dir, e))?;
        if entry
            .file_type()
            .map_err(|e| io(&entry.path(), e))?
            .is_dir()
        {
            classes.push((
                entry.file_name().to_string_lossy().into_owned(),
                entry.path(),
            ));
        }
    }
    classes.sort();
    if classes.len() < 2 {
        return Err(PredictorError::TooFewClasses {
            found: classes.len(),
        });
    }

    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (ci, (name, path)) in classes.iter().enumerate() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| io(path, e))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| {
                p.is_file()
                    && p.extension().and_then(|e| e.to_str()).is_some_and(|e| {
                        IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str())
                    })
            })
            .collect();
        files.sort();
        if files.len() < 2 {
            return Err(PredictorError::TooFewImages {
                class: name.clone(),
                found: files.len(),
            });
        }
        for f in files {
            let bytes = std::fs::read(&f).map_err(|e| io(&f, e))?;
            let image =
                RasterImage::decode(&bytes).map_err(|e| PredictorError::UnreadableImage {
                    path: f.display().to_string(),
                    message: e.to_string(),
                })?;
            let digest: [u8; 32] = Sha256::digest(&bytes).into();
            samples.push((ci, digest, image));
        }
        labels.push(name.clone());
    }
    samples.sort_by(|a, b| a.1.cmp(&b.1));
    Ok(LabeledImages { labels, samples })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePredictor {
    labels: Vec<String>,
    size: u32,
    scale: f64,
    /// Row-major `labels.len() x (3 * size * size)`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl ReferencePredictor {
    pub fn features(&self, image: &RasterImage) -> Vec<f64> {
        features(image, self.size, self.scale)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        artifact::encode(ARTIFACT_KIND, self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PredictorError> {
        let model: Self = artifact::decode(bytes, ARTIFACT_KIND)?;
        validate_labels(&model.labels)?;
        let dim = 3 * (model.size as usize).pow(2);
        if model.weights.len() != model.labels.len() * dim || model.bias.len() != model.labels.len()
        {
            return Err(artifact::ArtifactError::Payload(
                "weight shape does not match labels and size".into(),
            )
            .into());
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PredictorError> {
        Ok(artifact::write_file(path, &self.to_bytes())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PredictorError> {
        Self::from_bytes(&artifact::read_file(path)?)
    }

    fn scores(&self, x: &[f64]) -> Vec<f64> {
        let dim = x.len();
        self.bias
            .iter()
            .enumerate()
            .map(|(c, b)| b + dot(&self.weights[c * dim..(c + 1) * dim], x))
            .collect()
    }
}

impl ImagePredictor for ReferencePredictor {
    fn kind(&self) -> PredictorKind {
        PredictorKind::Reference
    }

    fn labels(&self) -> &[String] {
        &self.labels
    }

    fn predict_proba(&self, image: &RasterImage) -> Result<Vec<f64>, PredictorError> {
        Ok(softmax(&self.scores(&self.features(image))))
    }
}

fn features(image: &RasterImage, size: u32, scale: f64) -> Vec<f64> {
    image
        .resize(size, size)
        .as_bytes()
        .iter()
        .map(|&b| b as f64 / scale)
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trains on every image under `dir`; labels are the sorted folder names.
pub fn train_reference_predictor(
    dir: &Path,
    config: &ReferenceTrainingConfig,
) -> Result<ReferencePredictor, PredictorError> {
    config.validate()?;
    let data = load_labeled_images(dir)?;
    let refs: Vec<(usize, &RasterImage)> =
        data.samples.iter().map(|(c, _, img)| (*c, img)).collect();
    Ok(fit(data.labels, &refs, config))
}

fn fit(
    labels: Vec<String>,
    samples: &[(usize, &RasterImage)],
    config: &ReferenceTrainingConfig,
) -> ReferencePredictor {
    let k = labels.len();
    let dim = 3 * (config.size as usize).pow(2);
    let xs: Vec<Vec<f64>> = samples
        .iter()
        .map(|(_, img)| features(img, config.size, config.scale))
        .collect();
    let mut model = ReferencePredictor {
        labels,
        size: config.size,
        scale: config.scale,
        weights: vec![0.0; k * dim],
        bias: vec![0.0; k],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut grad_w = vec![0.0; k * dim];
    let mut grad_b = vec![0.0; k];
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grad_w.fill(0.0);
            grad_b.fill(0.0);
            for &i in batch {
                let p = softmax(&model.scores(&xs[i]));
                for c in 0..k {
                    let err = p[c] - f64::from(u8::from(samples[i].0 == c));
                    grad_b[c] += err;
                    for (g, x) in grad_w[c * dim..(c + 1) * dim].iter_mut().zip(&xs[i]) {
                        *g += err * x;
                    }
                }
            }
            let step = config.learning_rate / batch.len() as f64;
            for (w, g) in model.weights.iter_mut().zip(&grad_w) {
                *w -= step * g;
            }
            for (b, g) in model.bias.iter_mut().zip(&grad_b) {
                *b -= step * g;
            }
        }
    }
    model
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoldoutReport {
    pub accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
}

/// Holds out `ceil(fraction * n)` images per class (chosen by the seed),
/// trains on the rest and reports held-out accuracy.
pub fn evaluate_holdout(
    data: &LabeledImages,
    config: &ReferenceTrainingConfig,
    fraction: f64,
) -> Result<HoldoutReport, PredictorError> {
    config.validate()?;
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(PredictorError::InvalidConfig(format!(
            "holdout fraction must be in (0, 1), got {fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0f_4e1d);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..data.labels.len() {
        let mut idx: Vec<usize> = (0..data.samples.len())
            .filter(|&i| data.samples[i].0 == c)
            .collect();
        idx.shuffle(&mut rng);
        let n_test =
            ((idx.len() as f64 * fraction).ceil() as usize).clamp(1, idx.len().saturating_sub(1));
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    // keep digest order for training
    train.sort_unstable();
    let refs: Vec<(usize, &RasterImage)> = train
        .iter()
        .map(|&i| (data.samples[i].0, &data.samples[i].2))
        .collect();
    let model = fit(data.labels.clone(), &refs, config);
    let correct = test
        .iter()
        .filter(|&&i| {
            let p = softmax(&model.scores(&model.features(&data.samples[i].2)));
            crate::classifiers::argmax(&p) == data.samples[i].0
        })
        .count();
    Ok(HoldoutReport {
        accuracy: correct as f64 / test.len() as f64,
        n_train: train.len(),
        n_test: test.len(),
    })
}
