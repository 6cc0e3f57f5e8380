//! Machine-learning core for an agricultural decision service.
//!
//! The crate bundles four independent feature areas:
//!
//! * [`tabular`] and [`classifiers`]: loading the soil/weather crop dataset,
//!   stratified cross-validation and six from-scratch classifiers behind a
//!   common trait, selectable by name through a registry.
//! * [`fertilizer`]: an IF-THEN rule engine comparing soil N/P/K against
//!   per-crop ideal values.
//! * [`explain`] and [`predictor`]: SLIC superpixels, LIME-style perturbation
//!   explanations of a black-box leaf-image classifier, and the predictor
//!   implementations that can sit behind that black box.
//! * [`newsfeed`]: cached RSS/Atom ingestion with keyword filtering.

pub mod artifact;
pub mod classifiers;
pub mod explain;
pub mod fertilizer;
pub mod newsfeed;
pub mod predictor;
pub mod synthetic;
pub mod tabular;

pub use classifiers::{ClassifierSpec, TrainedClassifier};
pub use explain::{Explanation, RasterImage, SegmentMap};
pub use tabular::{CropSample, Dataset};
