use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TabularError;

/// Canonical feature order of the crop dataset.
pub const FEATURE_NAMES: [&str; 7] = ["N", "P", "K", "temperature", "humidity", "ph", "rainfall"];

const LABEL_COLUMN: &str = "label";

/// One row of the soil/weather crop dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropSample {
    pub n: f64,
    pub p: f64,
    pub k: f64,
    /// Degrees Celsius.
    pub temperature: f64,
    /// Relative humidity, percent.
    pub humidity: f64,
    pub ph: f64,
    /// Millimetres.
    pub rainfall: f64,
    pub label: String,
}

impl CropSample {
    /// Features in [`FEATURE_NAMES`] order.
    pub fn features(&self) -> [f64; 7] {
        [
            self.n,
            self.p,
            self.k,
            self.temperature,
            self.humidity,
            self.ph,
            self.rainfall,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub samples: Vec<CropSample>,
    /// Distinct labels in first-appearance order.
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn from_samples(samples: Vec<CropSample>) -> Self {
        let mut class_names: Vec<String> = Vec::new();
        for s in &samples {
            if !class_names.iter().any(|c| c == &s.label) {
                class_names.push(s.label.clone());
            }
        }
        Self {
            samples,
            class_names,
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_matrix(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.features().to_vec()).collect()
    }

    /// Class index (into `class_names`) of every sample.
    pub fn label_indices(&self) -> Vec<usize> {
        let lookup: HashMap<&str, usize> = self
            .class_names
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        self.samples
            .iter()
            .map(|s| lookup[s.label.as_str()])
            .collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for idx in self.label_indices() {
            counts[idx] += 1;
        }
        counts
    }
}

pub fn load_crop_dataset(path: impl AsRef<Path>) -> Result<Dataset, TabularError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut file = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => TabularError::MissingFile(display.clone()),
        _ => TabularError::Io {
            path: display.clone(),
            message: e.to_string(),
        },
    })?;
    let mut text = String::new();
    file.read_to_string(&mut text)
        .map_err(|e| TabularError::Io {
            path: display,
            message: e.to_string(),
        })?;
    parse_crop_csv(&text)
}

/// Parses the crop CSV. Row numbers in errors are 1-based file lines, so the
/// first data row is row 2.
pub fn parse_crop_csv(text: &str) -> Result<Dataset, TabularError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let expected: Vec<&str> = FEATURE_NAMES
        .iter()
        .copied()
        .chain([LABEL_COLUMN])
        .collect();
    let header = reader.headers().map_err(|e| TabularError::HeaderMismatch {
        expected: expected.join(","),
        found: e.to_string(),
    })?;
    let found: Vec<&str> = header.iter().collect();
    if found != expected {
        return Err(TabularError::HeaderMismatch {
            expected: expected.join(","),
            found: found.join(","),
        });
    }

    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| TabularError::RowParseError {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        if record.len() != expected.len() {
            return Err(TabularError::RowParseError {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", expected.len(), record.len()),
            });
        }
        let mut values = [0.0; 7];
        for (c, name) in FEATURE_NAMES.iter().enumerate() {
            let raw = &record[c];
            let v: f64 = raw.parse().map_err(|_| TabularError::RowParseError {
                row,
                column: name.to_string(),
                message: format!("`{raw}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(TabularError::NonFiniteValue {
                    row,
                    column: name.to_string(),
                });
            }
            values[c] = v;
        }
        check_range(row, "humidity", values[4], 0.0, 100.0)?;
        check_range(row, "ph", values[5], 0.0, 14.0)?;
        check_range(row, "rainfall", values[6], 0.0, f64::INFINITY)?;
        let label = record[7].to_string();
        if label.is_empty() {
            return Err(TabularError::RowParseError {
                row,
                column: LABEL_COLUMN.into(),
                message: "empty label".into(),
            });
        }
        samples.push(CropSample {
            n: values[0],
            p: values[1],
            k: values[2],
            temperature: values[3],
            humidity: values[4],
            ph: values[5],
            rainfall: values[6],
            label,
        });
    }
    Ok(Dataset::from_samples(samples))
}

fn check_range(
    row: usize,
    column: &str,
    value: f64,
    min: f64,
    max: f64,
) -> Result<(), TabularError> {
    if value < min || value > max {
        return Err(TabularError::OutOfRange {
            row,
            column: column.into(),
            value,
            min,
            max,
        });
    }
    Ok(())
}
