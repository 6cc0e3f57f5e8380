use super::{
    BoostingParams, ClassifierError, ClassifierSpec, DecisionTreeParams, LogisticParams,
    NaiveBayesParams, RandomForestParams, SvmParams,
};

/// A named classifier family with its default hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct RegistryEntry {
    /// Command-line / config name, e.g. `random_forest`.
    pub name: &'static str,
    /// Human-readable label used in benchmark tables.
    pub display_name: &'static str,
    make: fn(u64) -> ClassifierSpec,
}

impl RegistryEntry {
    pub fn default_spec(&self, seed: u64) -> ClassifierSpec {
        (self.make)(seed)
    }
}

static REGISTRY: [RegistryEntry; 6] = [
    RegistryEntry {
        name: "decision_tree",
        display_name: "Decision Tree",
        make: |_| ClassifierSpec::DecisionTree(DecisionTreeParams::default()),
    },
    RegistryEntry {
        name: "naive_bayes",
        display_name: "Naive Bayes",
        make: |_| ClassifierSpec::NaiveBayes(NaiveBayesParams::default()),
    },
    RegistryEntry {
        name: "svm",
        display_name: "SVM",
        make: |_| ClassifierSpec::Svm(SvmParams::default()),
    },
    RegistryEntry {
        name: "logistic_regression",
        display_name: "Logistic Regression",
        make: |_| ClassifierSpec::LogisticRegression(LogisticParams::default()),
    },
    RegistryEntry {
        name: "random_forest",
        display_name: "Random Forest",
        make: |seed| {
            ClassifierSpec::RandomForest(RandomForestParams {
                seed,
                ..Default::default()
            })
        },
    },
    RegistryEntry {
        name: "gradient_boosted_trees",
        display_name: "Gradient Boosted Trees",
        make: |seed| {
            ClassifierSpec::GradientBoostedTrees(BoostingParams {
                seed,
                ..Default::default()
            })
        },
    },
];

/// All built-in classifiers, in benchmark-table order.
pub fn registry() -> &'static [RegistryEntry] {
    &REGISTRY
}

pub fn lookup(name: &str) -> Result<&'static RegistryEntry, ClassifierError> {
    REGISTRY
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| ClassifierError::UnknownModelName {
            name: name.to_string(),
            valid: REGISTRY.iter().map(|e| e.name.to_string()).collect(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip_through_specs() {
        for e in registry() {
            assert_eq!(e.default_spec(1).name(), e.name);
        }
    }

    #[test]
    fn unknown_name_lists_valid_ones() {
        match lookup("bogus") {
            Err(ClassifierError::UnknownModelName { name, valid }) => {
                assert_eq!(name, "bogus");
                assert_eq!(valid.len(), 6);
                assert_eq!(valid[0], "decision_tree");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
