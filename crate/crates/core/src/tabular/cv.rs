use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::{accuracy, stratified_kfold, Dataset, TabularError};
use crate::classifiers::{ClassifierError, ClassifierSpec, TrainedClassifier};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CvError {
    #[error(transparent)]
    Folds(#[from] TabularError),
    #[error("fold {fold}: {source}")]
    Training {
        fold: usize,
        #[source]
        source: ClassifierError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub algorithm: String,
    pub fold_accuracies: Vec<f64>,
    pub fold_sizes: Vec<usize>,
    pub mean_accuracy: f64,
    /// Out-of-fold predicted class index for every sample.
    pub predictions: Vec<usize>,
}

/// k-fold cross-validation. Folds train in parallel; results are collected
/// in fold order so they match a sequential run exactly.
pub fn cross_validate(
    spec: &ClassifierSpec,
    dataset: &Dataset,
    k: usize,
    seed: u64,
) -> Result<CvReport, CvError> {
    let folds = stratified_kfold(dataset, k, seed)?;
    let x = dataset.feature_matrix();
    let y = dataset.label_indices();

    let outcomes: Vec<Result<(Vec<usize>, Vec<usize>), CvError>> = (0..k)
        .into_par_iter()
        .map(|fold| {
            let train = folds.training_indices(fold);
            let valid = folds.validation_indices(fold);
            let tx: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
            let ty: Vec<usize> = train.iter().map(|&i| y[i]).collect();
            let model =
                TrainedClassifier::train_encoded(spec, &tx, &ty, dataset.class_names.clone())
                    .map_err(|source| CvError::Training { fold, source })?;
            let predicted = valid
                .iter()
                .map(|&i| model.predict_index(&x[i]))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|source| CvError::Training { fold, source })?;
            Ok((valid, predicted))
        })
        .collect();
    // first failing fold, independent of scheduling
    let outcomes: Vec<(Vec<usize>, Vec<usize>)> = outcomes.into_iter().collect::<Result<_, _>>()?;

    let mut predictions = vec![usize::MAX; x.len()];
    let mut fold_accuracies = Vec::with_capacity(k);
    let mut fold_sizes = Vec::with_capacity(k);
    for (valid, predicted) in &outcomes {
        let actual: Vec<usize> = valid.iter().map(|&i| y[i]).collect();
        fold_accuracies.push(accuracy(predicted, &actual)?);
        fold_sizes.push(valid.len());
        for (&i, &p) in valid.iter().zip(predicted) {
            predictions[i] = p;
        }
    }
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / k as f64;
    Ok(CvReport {
        algorithm: spec.name().to_string(),
        fold_accuracies,
        fold_sizes,
        mean_accuracy,
        predictions,
    })
}
