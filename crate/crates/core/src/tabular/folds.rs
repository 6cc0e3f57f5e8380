use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, TabularError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    /// Fold index of every sample, in dataset order.
    pub assignment: Vec<usize>,
}

impl FoldAssignment {
    /// Indices of the samples held out in `fold`.
    pub fn validation_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn training_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded stratified k-fold split.
///
/// Each class is shuffled independently and dealt round-robin into the folds.
/// The starting fold rotates from class to class so that the remainders of
/// unevenly sized classes spread across folds instead of piling onto fold 0.
pub fn stratified_kfold(
    dataset: &Dataset,
    k: usize,
    seed: u64,
) -> Result<FoldAssignment, TabularError> {
    if k < 2 {
        return Err(TabularError::InvalidK(k));
    }
    let labels = dataset.label_indices();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); dataset.class_names.len()];
    for (i, &c) in labels.iter().enumerate() {
        members[c].push(i);
    }
    for (c, m) in members.iter().enumerate() {
        if m.len() < k {
            return Err(TabularError::ClassTooSmall {
                class: dataset.class_names[c].clone(),
                count: m.len(),
                k,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut offset = 0;
    for m in members.iter_mut() {
        m.shuffle(&mut rng);
        for (pos, &sample) in m.iter().enumerate() {
            assignment[sample] = (offset + pos) % k;
        }
        offset = (offset + m.len()) % k;
    }
    Ok(FoldAssignment { k, assignment })
}
