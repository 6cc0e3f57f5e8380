//! Rule-based fertilizer recommendation.
//!
//! For a crop with ideal ratios `(N*, P*, K*)` and measured soil `(N, P, K)`
//! the deviations are `d = ideal - soil`. The nutrient with the largest
//! `|d|` drives the recommendation (ties resolved N, then P, then K): a
//! positive deviation means the soil is LOW in it, a negative one HIGH. When
//! every `|d|` is within the tolerance the soil is BALANCED.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FertilizerError {
    #[error("file not found: {0}")]
    MissingFile(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("header must name Crop, N, P and K columns; found `{found}`")]
    HeaderMismatch { found: String },
    #[error("row {row}: {message}")]
    RowParseError { row: usize, message: String },
    #[error("crop `{0}` listed more than once")]
    DuplicateCrop(String),
    #[error("ideal-value table is empty")]
    EmptyTable,
    #[error("unknown crop `{crop}`; did you mean: {}", suggestions.join(", "))]
    UnknownCrop {
        crop: String,
        suggestions: Vec<String>,
    },
    #[error("{nutrient} must be a finite, non-negative number (got {value})")]
    NegativeInput { nutrient: Nutrient, value: f64 },
    #[error("advice catalog: {0}")]
    Advice(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Nutrient {
    N,
    P,
    K,
}

impl fmt::Display for Nutrient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Nutrient::N => "N",
            Nutrient::P => "P",
            Nutrient::K => "K",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FertilizerClass {
    NHigh,
    NLow,
    PHigh,
    PLow,
    KHigh,
    KLow,
    Balanced,
}

impl FertilizerClass {
    pub const ALL: [FertilizerClass; 7] = [
        FertilizerClass::NHigh,
        FertilizerClass::NLow,
        FertilizerClass::PHigh,
        FertilizerClass::PLow,
        FertilizerClass::KHigh,
        FertilizerClass::KLow,
        FertilizerClass::Balanced,
    ];

    pub fn code(self) -> &'static str {
        match self {
            FertilizerClass::NHigh => "N_HIGH",
            FertilizerClass::NLow => "N_LOW",
            FertilizerClass::PHigh => "P_HIGH",
            FertilizerClass::PLow => "P_LOW",
            FertilizerClass::KHigh => "K_HIGH",
            FertilizerClass::KLow => "K_LOW",
            FertilizerClass::Balanced => "BALANCED",
        }
    }

    fn corrective(nutrient: Nutrient, deviation: f64) -> Self {
        let low = deviation > 0.0;
        match (nutrient, low) {
            (Nutrient::N, true) => FertilizerClass::NLow,
            (Nutrient::N, false) => FertilizerClass::NHigh,
            (Nutrient::P, true) => FertilizerClass::PLow,
            (Nutrient::P, false) => FertilizerClass::PHigh,
            (Nutrient::K, true) => FertilizerClass::KLow,
            (Nutrient::K, false) => FertilizerClass::KHigh,
        }
    }
}

impl fmt::Display for FertilizerClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealValues {
    /// Name as written in the source file.
    pub crop: String,
    pub n: f64,
    pub p: f64,
    pub k: f64,
    pub ph: Option<f64>,
    pub soil_moisture: Option<f64>,
}

/// Ideal N/P/K per crop, keyed by lower-cased crop name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IdealNpkTable {
    entries: BTreeMap<String, IdealValues>,
}

impl IdealNpkTable {
    pub fn from_entries(
        entries: impl IntoIterator<Item = IdealValues>,
    ) -> Result<Self, FertilizerError> {
        let mut map = BTreeMap::new();
        for e in entries {
            let key = e.crop.trim().to_lowercase();
            if map.insert(key.clone(), e).is_some() {
                return Err(FertilizerError::DuplicateCrop(key));
            }
        }
        if map.is_empty() {
            return Err(FertilizerError::EmptyTable);
        }
        Ok(Self { entries: map })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Lower-cased crop names, sorted.
    pub fn crops(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get(&self, crop: &str) -> Option<&IdealValues> {
        self.entries.get(&crop.trim().to_lowercase())
    }

    /// Known crop names closest to `crop` by edit distance.
    pub fn suggestions(&self, crop: &str, limit: usize) -> Vec<String> {
        let query = crop.trim().to_lowercase();
        let mut scored: Vec<(f64, &String)> = self
            .entries
            .keys()
            .map(|k| (strsim::normalized_levenshtein(&query, k), k))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        scored
            .into_iter()
            .take(limit)
            .map(|(_, k)| k.clone())
            .collect()
    }
}

/// Reads the fertilizer CSV. Columns are located by (case-insensitive) name,
/// so extra columns such as an unnamed index are ignored; `pH` and
/// `soil_moisture` are optional.
pub fn load_ideal_table(path: impl AsRef<Path>) -> Result<IdealNpkTable, FertilizerError> {
    let text = read_text(path.as_ref())?;
    parse_ideal_table(&text)
}

pub fn parse_ideal_table(text: &str) -> Result<IdealNpkTable, FertilizerError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| FertilizerError::HeaderMismatch {
            found: e.to_string(),
        })?
        .iter()
        .map(|h| h.to_lowercase())
        .collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let (Some(ci), Some(ni), Some(pi), Some(ki)) = (col("crop"), col("n"), col("p"), col("k"))
    else {
        return Err(FertilizerError::HeaderMismatch {
            found: header.join(","),
        });
    };
    let phi = col("ph");
    let mi = col("soil_moisture").or_else(|| col("soil moisture"));

    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| FertilizerError::RowParseError {
            row,
            message: e.to_string(),
        })?;
        let num = |idx: usize, name: &str| -> Result<f64, FertilizerError> {
            let raw = rec.get(idx).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| FertilizerError::RowParseError {
                row,
                message: format!("column {name}: `{raw}` is not a number"),
            })?;
            if !v.is_finite() || v < 0.0 {
                return Err(FertilizerError::RowParseError {
                    row,
                    message: format!("column {name}: {v} must be finite and >= 0"),
                });
            }
            Ok(v)
        };
        let crop = rec.get(ci).unwrap_or("").to_string();
        if crop.is_empty() {
            return Err(FertilizerError::RowParseError {
                row,
                message: "empty crop name".into(),
            });
        }
        rows.push(IdealValues {
            crop,
            n: num(ni, "N")?,
            p: num(pi, "P")?,
            k: num(ki, "K")?,
            ph: phi.map(|i| num(i, "pH")).transpose()?,
            soil_moisture: mi.map(|i| num(i, "soil_moisture")).transpose()?,
        });
    }
    IdealNpkTable::from_entries(rows)
}

/// Display text for each recommendation class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdviceCatalog {
    advice: BTreeMap<FertilizerClass, String>,
}

impl AdviceCatalog {
    /// Parses a TOML document with an `[advice]` table keyed by class code.
    /// Every class must be present.
    pub fn from_toml(text: &str) -> Result<Self, FertilizerError> {
        let catalog: AdviceCatalog =
            toml::from_str(text).map_err(|e| FertilizerError::Advice(e.to_string()))?;
        if let Some(missing) = FertilizerClass::ALL
            .iter()
            .find(|c| !catalog.advice.contains_key(c))
        {
            return Err(FertilizerError::Advice(format!(
                "missing entry for {missing}"
            )));
        }
        Ok(catalog)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FertilizerError> {
        Self::from_toml(&read_text(path.as_ref())?)
    }

    pub fn text(&self, class: FertilizerClass) -> &str {
        &self.advice[&class]
    }
}

impl Default for AdviceCatalog {
    fn default() -> Self {
        let advice = FertilizerClass::ALL
            .iter()
            .map(|&c| {
                let text = match c {
                    FertilizerClass::Balanced => {
                        "Soil N, P and K match the crop's ideal values.".to_string()
                    }
                    other => {
                        let code = other.code();
                        let (nutrient, level) = code.split_once('_').unwrap();
                        format!("Soil {nutrient} is {} for this crop.", level.to_lowercase())
                    }
                };
                (c, text)
            })
            .collect();
        Self { advice }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FertilizerRecommendation {
    pub class: FertilizerClass,
    /// Nutrient with the largest absolute deviation.
    pub nutrient: Nutrient,
    /// `ideal - soil` for that nutrient.
    pub deviation: f64,
    pub advice: String,
}

#[derive(Debug, Clone)]
pub struct FertilizerEngine {
    table: IdealNpkTable,
    advice: AdviceCatalog,
    tolerance: f64,
}

impl FertilizerEngine {
    pub fn new(table: IdealNpkTable, advice: AdviceCatalog) -> Self {
        Self {
            table,
            advice,
            tolerance: 0.0,
        }
    }

    /// Deviations with `|d| <= tolerance` count as balanced.
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance.max(0.0);
        self
    }

    pub fn table(&self) -> &IdealNpkTable {
        &self.table
    }

    pub fn recommend(
        &self,
        crop: &str,
        soil_n: f64,
        soil_p: f64,
        soil_k: f64,
    ) -> Result<FertilizerRecommendation, FertilizerError> {
        for (nutrient, value) in [
            (Nutrient::N, soil_n),
            (Nutrient::P, soil_p),
            (Nutrient::K, soil_k),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(FertilizerError::NegativeInput { nutrient, value });
            }
        }
        let ideal = self
            .table
            .get(crop)
            .ok_or_else(|| FertilizerError::UnknownCrop {
                crop: crop.to_string(),
                suggestions: self.table.suggestions(crop, 3),
            })?;
        let deviations = [
            (Nutrient::N, ideal.n - soil_n),
            (Nutrient::P, ideal.p - soil_p),
            (Nutrient::K, ideal.k - soil_k),
        ];
        let mut driver = deviations[0];
        for d in &deviations[1..] {
            if d.1.abs() > driver.1.abs() {
                driver = *d;
            }
        }
        let class = if driver.1.abs() <= self.tolerance {
            FertilizerClass::Balanced
        } else {
            FertilizerClass::corrective(driver.0, driver.1)
        };
        Ok(FertilizerRecommendation {
            class,
            nutrient: driver.0,
            deviation: driver.1,
            advice: self.advice.text(class).to_string(),
        })
    }
}

fn read_text(path: &Path) -> Result<String, FertilizerError> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => FertilizerError::MissingFile(path.display().to_string()),
        _ => FertilizerError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn engine() -> FertilizerEngine {
        let table = parse_ideal_table(
            "Crop,N,P,K,pH,soil_moisture\nrice,80,40,40,5.5,30\nMaize,80,40,20,5.5,50\n",
        )
        .unwrap();
        FertilizerEngine::new(table, AdviceCatalog::default())
    }

    #[test]
    fn ideal_soil_is_balanced() {
        let r = engine().recommend("rice", 80.0, 40.0, 40.0).unwrap();
        assert_eq!(r.class, FertilizerClass::Balanced);
        assert_eq!(r.deviation, 0.0);
    }

    #[test]
    fn forced_classes() {
        let e = engine();
        let r = e.recommend("rice", 50.0, 40.0, 40.0).unwrap();
        assert_eq!(
            (r.class, r.nutrient, r.deviation),
            (FertilizerClass::NLow, Nutrient::N, 30.0)
        );
        let r = e.recommend("rice", 80.0, 40.0, 90.0).unwrap();
        assert_eq!(
            (r.class, r.nutrient, r.deviation),
            (FertilizerClass::KHigh, Nutrient::K, -50.0)
        );
    }

    #[test]
    fn ties_prefer_n_then_p() {
        let e = engine();
        // |dN| = |dP| = |dK| = 10
        assert_eq!(
            e.recommend("rice", 70.0, 50.0, 30.0).unwrap().class,
            FertilizerClass::NLow
        );
        // |dP| = |dK| = 10
        assert_eq!(
            e.recommend("rice", 80.0, 50.0, 30.0).unwrap().class,
            FertilizerClass::PHigh
        );
    }

    #[test]
    fn lookup_is_case_insensitive() {
        assert_eq!(
            engine().recommend("MAIZE", 80.0, 40.0, 20.0).unwrap().class,
            FertilizerClass::Balanced
        );
    }

    #[test]
    fn tolerance_widens_balanced() {
        let e = engine().with_tolerance(5.0);
        assert_eq!(
            e.recommend("rice", 76.0, 44.0, 40.0).unwrap().class,
            FertilizerClass::Balanced
        );
        assert_eq!(
            e.recommend("rice", 74.0, 40.0, 40.0).unwrap().class,
            FertilizerClass::NLow
        );
    }

    #[test]
    fn unknown_crop_suggests_neighbours() {
        match engine().recommend("rise", 1.0, 1.0, 1.0) {
            Err(FertilizerError::UnknownCrop { crop, suggestions }) => {
                assert_eq!(crop, "rise");
                assert_eq!(suggestions[0], "rice");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_input_rejected() {
        assert!(matches!(
            engine().recommend("rice", 1.0, -2.0, 1.0),
            Err(FertilizerError::NegativeInput {
                nutrient: Nutrient::P,
                ..
            })
        ));
    }

    #[test]
    fn duplicate_and_header_errors() {
        assert_eq!(
            parse_ideal_table("Crop,N,P,K\nrice,1,2,3\nRice,1,2,3\n"),
            Err(FertilizerError::DuplicateCrop("rice".into()))
        );
        assert!(matches!(
            parse_ideal_table("Crop,N,P\nrice,1,2\n"),
            Err(FertilizerError::HeaderMismatch { .. })
        ));
    }

    #[test]
    fn single_row_echoes() {
        let t =
            parse_ideal_table(",Crop,N,P,K,pH,soil_moisture\n0,coffee,100,20,30,5.5,20\n").unwrap();
        assert_eq!(t.len(), 1);
        let v = t.get("coffee").unwrap();
        assert_eq!(
            (v.n, v.p, v.k, v.ph, v.soil_moisture),
            (100.0, 20.0, 30.0, Some(5.5), Some(20.0))
        );
    }

    #[test]
    fn monotone_n_low() {
        let e = engine();
        let mut n = 79.5;
        while n >= 0.0 {
            assert_eq!(
                e.recommend("rice", n, 40.0, 40.0).unwrap().class,
                FertilizerClass::NLow
            );
            n -= 3.7;
        }
    }

    #[test]
    fn advice_catalog_requires_every_class() {
        let err = AdviceCatalog::from_toml("[advice]\nN_HIGH = \"x\"\n").unwrap_err();
        assert!(matches!(err, FertilizerError::Advice(_)));
        let full: String = FertilizerClass::ALL
            .iter()
            .map(|c| format!("{} = \"text for {}\"\n", c.code(), c.code()))
            .collect();
        let cat = AdviceCatalog::from_toml(&format!("[advice]\n{full}")).unwrap();
        assert_eq!(cat.text(FertilizerClass::PLow), "text for P_LOW");
    }
}
