use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use agroml::artifact::ArtifactError;
use agroml::classifiers::registry;
use agroml::tabular::load_crop_dataset;
use agroml::TrainedClassifier;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

/// Every classifier kind, saved to disk and loaded back, predicts bit-for-bit
/// the same on 100 random inputs.
#[test]
fn every_model_kind_round_trips_bit_for_bit() {
    let ds = load_crop_dataset(data("crop_recommendation.csv")).unwrap();
    // every fourth row keeps training quick and still covers all classes
    let rows: Vec<usize> = (0..ds.len()).step_by(4).collect();
    let x: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| ds.samples[i].features().to_vec())
        .collect();
    let y: Vec<&str> = rows.iter().map(|&i| ds.samples[i].label.as_str()).collect();

    let columns: Vec<(f64, f64)> = (0..7)
        .map(|j| {
            let col = x.iter().map(|r| r[j]);
            (
                col.clone().fold(f64::INFINITY, f64::min),
                col.fold(f64::NEG_INFINITY, f64::max),
            )
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let inputs: Vec<Vec<f64>> = (0..100)
        .map(|_| {
            columns
                .iter()
                .map(|&(lo, hi)| rng.gen_range(lo - 0.1 * (hi - lo)..=hi + 0.1 * (hi - lo)))
                .collect()
        })
        .collect();

    let dir = tempfile::tempdir().unwrap();
    for entry in registry() {
        let model = TrainedClassifier::train(&entry.default_spec(7), &x, &y).unwrap();
        let path = dir.path().join(format!("{}.agroml", entry.name));
        model.save(&path).unwrap();
        let loaded = TrainedClassifier::load(&path).unwrap();
        assert_eq!(loaded.spec(), model.spec(), "{}", entry.name);
        assert_eq!(loaded.class_names(), model.class_names());
        for v in &inputs {
            let (a, b) = (
                model.predict_proba(v).unwrap(),
                loaded.predict_proba(v).unwrap(),
            );
            assert!(
                a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()),
                "{}: {a:?} vs {b:?}",
                entry.name
            );
        }
        // the bytes themselves are stable across a load/save cycle
        assert_eq!(loaded.to_bytes(), model.to_bytes(), "{}", entry.name);
    }
}

#[test]
fn damaged_artifacts_are_rejected() {
    let ds = load_crop_dataset(data("crop_recommendation.csv")).unwrap();
    let x = ds.feature_matrix();
    let y: Vec<&str> = ds.samples.iter().map(|s| s.label.as_str()).collect();
    let model = TrainedClassifier::train(&registry()[1].default_spec(0), &x, &y).unwrap();
    let mut bytes = model.to_bytes();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    assert!(matches!(
        TrainedClassifier::from_bytes(&bytes),
        Err(ArtifactError::Corrupt(_))
    ));
    assert!(TrainedClassifier::from_bytes(&bytes[..10]).is_err());
}
