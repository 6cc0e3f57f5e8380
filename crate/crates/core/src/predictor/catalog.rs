//! Label → description/remedy lookup for leaf-disease predictions.
//!
//! Stored as TOML, one `[[disease]]` table per label.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("cannot read catalog {path}: {message}")]
    Io { path: String, message: String },
    #[error("catalog does not parse: {0}")]
    Parse(String),
    #[error("catalog is empty")]
    Empty,
    #[error("label `{0}` appears twice")]
    DuplicateLabel(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("labels without a catalog entry: {}", .0.join(", "))]
    Incomplete(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiseaseEntry {
    pub label: String,
    pub display_name: String,
    pub crop: String,
    pub disease: String,
    pub description: String,
    pub remedy: String,
}

/// Catalog lookup result used on the serving path. `known` is false for a
/// generated fallback entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResolvedDisease {
    pub entry: DiseaseEntry,
    pub known: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiseaseCatalog {
    entries: BTreeMap<String, DiseaseEntry>,
}

#[derive(Deserialize)]
struct CatalogFile {
    #[serde(default)]
    disease: Vec<DiseaseEntry>,
}

impl DiseaseCatalog {
    pub fn from_entries(
        entries: impl IntoIterator<Item = DiseaseEntry>,
    ) -> Result<Self, CatalogError> {
        let mut map = BTreeMap::new();
        for e in entries {
            if map.contains_key(&e.label) {
                return Err(CatalogError::DuplicateLabel(e.label));
            }
            map.insert(e.label.clone(), e);
        }
        if map.is_empty() {
            return Err(CatalogError::Empty);
        }
        Ok(Self { entries: map })
    }

    pub fn from_toml(text: &str) -> Result<Self, CatalogError> {
        let file: CatalogFile =
            toml::from_str(text).map_err(|e| CatalogError::Parse(e.to_string()))?;
        Self::from_entries(file.disease)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CatalogError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CatalogError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries sorted by label.
    pub fn entries(&self) -> impl Iterator<Item = &DiseaseEntry> {
        self.entries.values()
    }

    pub fn labels(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    pub fn lookup(&self, label: &str) -> Result<&DiseaseEntry, CatalogError> {
        self.entries
            .get(label)
            .ok_or_else(|| CatalogError::UnknownLabel(label.to_string()))
    }

    /// Never fails: unknown labels get a generic entry with `known = false`.
    pub fn resolve(&self, label: &str) -> ResolvedDisease {
        match self.lookup(label) {
            Ok(e) => ResolvedDisease {
                entry: e.clone(),
                known: true,
            },
            Err(_) => ResolvedDisease {
                entry: generic_entry(label),
                known: false,
            },
        }
    }

    /// Every label must have an entry.
    pub fn check_covers(&self, labels: &[String]) -> Result<(), CatalogError> {
        let missing: Vec<String> = labels
            .iter()
            .filter(|l| !self.entries.contains_key(*l))
            .cloned()
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(CatalogError::Incomplete(missing))
        }
    }
}

/// Splits PlantVillage-style `Crop___Disease` names.
fn generic_entry(label: &str) -> DiseaseEntry {
    let (crop, disease) = label.split_once("___").unwrap_or(("unknown", label));
    let tidy = |s: &str| {
        s.replace('_', " ")
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
    };
    DiseaseEntry {
        label: label.to_string(),
        display_name: tidy(label),
        crop: tidy(crop),
        disease: tidy(disease),
        description: "No catalog entry exists for this label.".into(),
        remedy: "Consult a local agricultural extension officer before treating.".into(),
    }
}
