//! Crop dataset handling, min-max scaling, stratified folds, metrics and the
//! cross-validation driver.

mod benchmark;
mod cv;
mod dataset;
mod folds;
mod metrics;
mod scaler;

pub use benchmark::{run_benchmark, BenchmarkReport, DatasetFingerprint, ModelResult};
pub use cv::{cross_validate, CvError, CvReport};
pub use dataset::{load_crop_dataset, parse_crop_csv, CropSample, Dataset, FEATURE_NAMES};
pub use folds::{stratified_kfold, FoldAssignment};
pub use metrics::accuracy;
pub use scaler::{fit_minmax, ScalerParams};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TabularError {
    #[error("dataset file not found: {0}")]
    MissingFile(String),
    #[error("i/o error reading {path}: {message}")]
    Io { path: String, message: String },
    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    HeaderMismatch { expected: String, found: String },
    #[error("row {row}, column `{column}`: {message}")]
    RowParseError {
        row: usize,
        column: String,
        message: String,
    },
    #[error("row {row}, column `{column}`: value is not finite")]
    NonFiniteValue { row: usize, column: String },
    #[error("row {row}, column `{column}`: value {value} outside [{min}, {max}]")]
    OutOfRange {
        row: usize,
        column: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("fold count must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("class `{class}` has {count} samples, fewer than the {k} folds requested")]
    ClassTooSmall {
        class: String,
        count: usize,
        k: usize,
    },
    #[error("cannot fit a scaler on an empty set")]
    EmptyFitSet,
    #[error("length mismatch: {left} predicted vs {right} actual")]
    LengthMismatch { left: usize, right: usize },
    #[error("cannot score empty label lists")]
    Empty,
}
