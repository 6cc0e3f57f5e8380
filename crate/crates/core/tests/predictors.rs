use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use url::Url;

use agroml::explain::RasterImage;
use agroml::predictor::{
    evaluate_holdout, load_labeled_images, train_reference_predictor, validate_distribution,
    ExternalConfig, ExternalPredictor, ExternalRequest, ImagePredictor, PredictorError,
    PredictorHandle, ReferencePredictor, ReferenceTrainingConfig, StubPredictor,
};
use agroml::synthetic::{write_blob_dataset, MarkedRegionPredictor, BLOB_CLASSES};

fn noise_image(rng: &mut ChaCha8Rng) -> RasterImage {
    let (w, h) = (rng.gen_range(1..80), rng.gen_range(1..80));
    let data: Vec<u8> = (0..w * h * 3).map(|_| rng.gen()).collect();
    RasterImage::new(w, h, data).unwrap()
}

fn trained_reference() -> ReferencePredictor {
    let dir = tempfile::tempdir().unwrap();
    write_blob_dataset(dir.path(), 20, 1).unwrap();
    train_reference_predictor(dir.path(), &ReferenceTrainingConfig::default()).unwrap()
}

#[test]
fn distributions_hold_under_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let reference = PredictorHandle::new(trained_reference()).unwrap();
    let stub = PredictorHandle::new(
        StubPredictor::uniform(vec!["a".into(), "b".into(), "c".into()]).unwrap(),
    )
    .unwrap();
    for _ in 0..40 {
        let img = noise_image(&mut rng);
        for p in [&reference, &stub] {
            let probs = p.predict_proba(&img).unwrap();
            validate_distribution(&probs, p.labels().len()).unwrap();
            let (idx, top) = p.predict(&img).unwrap();
            assert_eq!(top, probs[idx]);
            assert!(probs.iter().all(|&q| q <= top));
        }
    }
    let marked = PredictorHandle::new(MarkedRegionPredictor::for_quadrants()).unwrap();
    let probs = marked
        .predict_proba(&agroml::synthetic::quadrant_image())
        .unwrap();
    validate_distribution(&probs, 5).unwrap();
}

#[test]
fn handle_rejects_broken_stub_output() {
    let bad = PredictorHandle::new(
        StubPredictor::new(
            vec!["a".into(), "b".into()],
            agroml::predictor::StubBehavior::Fixed(vec![0.7, 0.7]),
        )
        .unwrap(),
    )
    .unwrap();
    assert!(matches!(
        bad.predict_proba(&RasterImage::filled(4, 4, [0; 3])),
        Err(PredictorError::ProtocolViolation(_))
    ));
}

#[test]
fn reference_predictor_holds_out_ninety_percent_within_two_minutes() {
    let dir = tempfile::tempdir().unwrap();
    write_blob_dataset(dir.path(), 60, 7).unwrap();
    let started = Instant::now();
    let data = load_labeled_images(dir.path()).unwrap();
    assert_eq!(data.labels, BLOB_CLASSES);
    let report = evaluate_holdout(&data, &ReferenceTrainingConfig::default(), 0.25).unwrap();
    let elapsed = started.elapsed();
    assert!(
        report.accuracy >= 0.90,
        "holdout accuracy {}",
        report.accuracy
    );
    assert!(elapsed <= Duration::from_secs(120), "{elapsed:?}");
    assert_eq!(report.n_test, 30);
}

#[test]
fn reference_training_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    write_blob_dataset(dir.path(), 10, 3).unwrap();
    let cfg = ReferenceTrainingConfig::default();
    let a = train_reference_predictor(dir.path(), &cfg).unwrap();
    let b = train_reference_predictor(dir.path(), &cfg).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    let path = dir.path().join("ref.agroml");
    a.save(&path).unwrap();
    let c = ReferencePredictor::load(&path).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let img = noise_image(&mut rng);
        let (pa, pc) = (
            a.predict_proba(&img).unwrap(),
            c.predict_proba(&img).unwrap(),
        );
        assert!(pa.iter().zip(&pc).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

/// Replies are served in order; each request body is recorded.
struct StubServer {
    url: Url,
    requests: Arc<Mutex<Vec<String>>>,
}

fn stub_server(replies: Vec<(u16, String)>) -> StubServer {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = Url::parse(&format!(
        "http://{}/predict",
        listener.local_addr().unwrap()
    ))
    .unwrap();
    let requests = Arc::new(Mutex::new(Vec::new()));
    let log = requests.clone();
    std::thread::spawn(move || {
        for (status, body) in replies {
            let Ok((stream, _)) = listener.accept() else {
                return;
            };
            let mut reader = BufReader::new(stream);
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut req = vec![0; len];
            reader.read_exact(&mut req).unwrap();
            log.lock().unwrap().push(String::from_utf8(req).unwrap());
            let mut stream = reader.into_inner();
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    StubServer { url, requests }
}

fn external(server: &StubServer, labels: &[&str], retries: usize) -> ExternalPredictor {
    let mut cfg = ExternalConfig::new(server.url.clone());
    cfg.retries = retries;
    cfg.retry_delay = Duration::from_millis(10);
    cfg.timeout = Duration::from_secs(5);
    ExternalPredictor::new(cfg, labels.iter().map(|s| s.to_string()).collect()).unwrap()
}

#[test]
fn external_protocol_conformance() {
    let server = stub_server(vec![
        (
            200,
            r#"{"labels":["a","b","c"],"probs":[0.2,0.5,0.3]}"#.into(),
        ),
        // permuted labels map back onto the expected order
        (
            200,
            r#"{"labels":["c","a","b"],"probs":[0.3,0.2,0.5]}"#.into(),
        ),
        (
            200,
            r#"{"labels":["a","b","c"],"probs":[0.2,0.5,0.4]}"#.into(),
        ),
        (200, r#"{"labels":["a","b"],"probs":[0.5,0.5]}"#.into()),
        (200, r#"{"labels":["a","b","c"],"probs":[0.5,0.5]}"#.into()),
        (
            200,
            r#"{"labels":["a","b","d"],"probs":[0.2,0.5,0.3]}"#.into(),
        ),
        (200, "not json".into()),
        (400, r#"{"detail":"bad image"}"#.into()),
    ]);
    let p = external(&server, &["a", "b", "c"], 0);
    let img = RasterImage::filled(3, 2, [1, 2, 3]);
    assert_eq!(p.predict_proba(&img).unwrap(), vec![0.2, 0.5, 0.3]);
    assert_eq!(p.predict_proba(&img).unwrap(), vec![0.2, 0.5, 0.3]);
    for case in [
        "bad sum",
        "short",
        "length mismatch",
        "unknown label",
        "malformed",
        "4xx",
    ] {
        assert!(
            matches!(
                p.predict_proba(&img),
                Err(PredictorError::ProtocolViolation(_))
            ),
            "{case} should be a protocol violation"
        );
    }
    let first: ExternalRequest = serde_json::from_str(&server.requests.lock().unwrap()[0]).unwrap();
    assert_eq!(first.format, agroml::explain::ImageKind::Png);
    use base64::Engine as _;
    let png = base64::engine::general_purpose::STANDARD
        .decode(first.image_b64)
        .unwrap();
    assert_eq!(RasterImage::decode(&png).unwrap(), img);
}

#[test]
fn external_retries_server_errors_then_gives_up() {
    let ok = r#"{"labels":["x","y"],"probs":[1.0,0.0]}"#.to_string();
    let server = stub_server(vec![(503, "{}".into()), (200, ok)]);
    let p = external(&server, &["x", "y"], 2);
    assert_eq!(
        p.predict_proba(&RasterImage::filled(2, 2, [0; 3])).unwrap(),
        vec![1.0, 0.0]
    );

    let server = stub_server(vec![(500, "{}".into()), (502, "{}".into())]);
    let p = external(&server, &["x", "y"], 1);
    match p.predict_proba(&RasterImage::filled(2, 2, [0; 3])) {
        Err(PredictorError::ExternalUnavailable { attempts, .. }) => assert_eq!(attempts, 2),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn external_label_order_does_not_change_predictions() {
    // same distribution, served under two label permutations
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let labels = ["a", "b", "c", "d"];
    for _ in 0..5 {
        let mut probs: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
        let sum: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= sum);
        let mut order: Vec<usize> = (0..4).collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);
        let reply = |ord: &[usize]| {
            serde_json::json!({
                "labels": ord.iter().map(|&i| labels[i]).collect::<Vec<_>>(),
                "probs": ord.iter().map(|&i| probs[i]).collect::<Vec<_>>(),
            })
            .to_string()
        };
        let server = stub_server(vec![(200, reply(&[0, 1, 2, 3])), (200, reply(&order))]);
        let p = external(&server, &labels, 0);
        let img = RasterImage::filled(2, 2, [9; 3]);
        let a = p.predict_proba(&img).unwrap();
        let b = p.predict_proba(&img).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, probs);
    }
}
