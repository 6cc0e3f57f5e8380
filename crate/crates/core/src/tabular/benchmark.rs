//! Cross-validated accuracy table over several classifiers.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::cv::{cross_validate, CvError};
use super::dataset::Dataset;
use super::TabularError;
use crate::classifiers::RegistryEntry;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetFingerprint {
    pub rows: usize,
    pub classes: usize,
    /// Hex SHA-256 of the source bytes.
    pub sha256: String,
}

impl DatasetFingerprint {
    pub fn new(dataset: &Dataset, source: &[u8]) -> Self {
        let digest = Sha256::digest(source);
        Self {
            rows: dataset.len(),
            classes: dataset.class_names.len(),
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        }
    }

    pub fn of_file(dataset: &Dataset, path: &Path) -> Result<Self, TabularError> {
        let bytes = std::fs::read(path).map_err(|e| TabularError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(Self::new(dataset, &bytes))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelResult {
    pub name: String,
    pub display_name: String,
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub dataset: DatasetFingerprint,
    pub seed: u64,
    pub folds: usize,
    /// In the order the entries were given.
    pub models: Vec<ModelResult>,
    pub total_wall_time_secs: f64,
}

impl BenchmarkReport {
    pub fn model(&self, name: &str) -> Option<&ModelResult> {
        self.models.iter().find(|m| m.name == name)
    }

    /// Fixed-width text table.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "dataset: {} rows, {} classes, sha256 {}\nseed {}, {}-fold stratified cross-validation\n\n",
            self.dataset.rows, self.dataset.classes, self.dataset.sha256, self.seed, self.folds
        );
        out.push_str(&format!(
            "{:<24} {:>9} {:>9}  {}\n",
            "model", "accuracy", "time (s)", "fold accuracies"
        ));
        for m in &self.models {
            let folds: Vec<String> = m
                .fold_accuracies
                .iter()
                .map(|a| format!("{a:.4}"))
                .collect();
            out.push_str(&format!(
                "{:<24} {:>9.4} {:>9.2}  {}\n",
                m.display_name,
                m.mean_accuracy,
                m.wall_time_secs,
                folds.join(" ")
            ));
        }
        out.push_str(&format!(
            "\ntotal time {:.2} s\n",
            self.total_wall_time_secs
        ));
        out
    }
}

/// Runs k-fold cross-validation for each entry with its default
/// hyperparameters.
pub fn run_benchmark(
    dataset: &Dataset,
    fingerprint: DatasetFingerprint,
    entries: &[&RegistryEntry],
    folds: usize,
    seed: u64,
) -> Result<BenchmarkReport, CvError> {
    let start = Instant::now();
    let mut models = Vec::with_capacity(entries.len());
    for entry in entries {
        let t = Instant::now();
        let cv = cross_validate(&entry.default_spec(seed), dataset, folds, seed)?;
        models.push(ModelResult {
            name: entry.name.to_string(),
            display_name: entry.display_name.to_string(),
            mean_accuracy: cv.mean_accuracy,
            fold_accuracies: cv.fold_accuracies,
            wall_time_secs: t.elapsed().as_secs_f64(),
        });
    }
    Ok(BenchmarkReport {
        dataset: fingerprint,
        seed,
        folds,
        models,
        total_wall_time_secs: start.elapsed().as_secs_f64(),
    })
}
