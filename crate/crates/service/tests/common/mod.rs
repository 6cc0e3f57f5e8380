#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use serde_json::Value;
use tower::ServiceExt;

use agroml::classifiers::lookup;
use agroml::explain::RasterImage;
use agroml::fertilizer::{load_ideal_table, AdviceCatalog, FertilizerEngine};
use agroml::newsfeed::{FeedConfig, FeedFetcher, NewsError, NewsFeed};
use agroml::predictor::{DiseaseCatalog, PredictorHandle, StubPredictor};
use agroml::tabular::load_crop_dataset;
use agroml::TrainedClassifier;
use agroml_service::{router, AppState, ExplainSettings};

pub const BOUNDARY: &str = "agromlTestBoundary7MA4YWxkTrZu0gW";
pub const FEED_URL: &str = "https://news.example.org/rss";

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn data_path(name: &str) -> PathBuf {
    repo_root().join("data").join(name)
}

pub fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(
        PathBuf::from(env!("CARGO_MANIFEST_DIR"))
            .join("tests/fixtures")
            .join(name),
    )
    .unwrap()
}

/// Random forest on the bundled crop CSV, trained once per test binary.
pub fn crop_model() -> TrainedClassifier {
    static MODEL: OnceLock<TrainedClassifier> = OnceLock::new();
    MODEL
        .get_or_init(|| {
            let ds = load_crop_dataset(data_path("crop_recommendation.csv")).unwrap();
            let spec = lookup("random_forest").unwrap().default_spec(0);
            let y: Vec<&str> = ds.samples.iter().map(|s| s.label.as_str()).collect();
            TrainedClassifier::train(&spec, &ds.feature_matrix(), &y).unwrap()
        })
        .clone()
}

pub fn catalog() -> DiseaseCatalog {
    DiseaseCatalog::load(data_path("disease_catalog.toml")).unwrap()
}

pub fn fertilizer() -> FertilizerEngine {
    FertilizerEngine::new(
        load_ideal_table(data_path("fertilizer.csv")).unwrap(),
        AdviceCatalog::load(data_path("fertilizer_advice.toml")).unwrap(),
    )
}

/// Serves the RSS fixture until switched to failing.
#[derive(Clone, Default)]
pub struct FixtureFetcher {
    pub failing: Arc<AtomicBool>,
}

impl FeedFetcher for FixtureFetcher {
    fn fetch(&self, url: &str) -> Result<Vec<u8>, NewsError> {
        if self.failing.load(Ordering::SeqCst) {
            return Err(NewsError::FetchFailed {
                url: url.into(),
                message: "connection refused".into(),
            });
        }
        Ok(fixture("news.rss"))
    }
}

pub fn news_feed(fetcher: FixtureFetcher, ttl: Duration) -> NewsFeed {
    NewsFeed::new(
        FeedConfig {
            urls: vec![FEED_URL.into()],
            ttl,
            retry_interval: Duration::ZERO,
            ..FeedConfig::default()
        },
        Box::new(fetcher),
    )
}

/// Probability of label 0 grows with the image's mean green level.
pub fn greenness_predictor() -> PredictorHandle {
    let labels: Vec<String> = catalog().labels().into_iter().take(3).collect();
    PredictorHandle::new(
        StubPredictor::from_fn(labels, |img: &RasterImage| {
            let g =
                img.pixels().map(|p| p[1] as f64).sum::<f64>() / img.pixel_count() as f64 / 255.0;
            vec![0.2 + 0.6 * g, 0.4 - 0.3 * g, 0.4 - 0.3 * g]
        })
        .unwrap(),
    )
    .unwrap()
}

pub struct StateBuilder {
    pub crop_model: Option<TrainedClassifier>,
    pub predictor: PredictorHandle,
    pub catalog: Option<DiseaseCatalog>,
    pub fetcher: FixtureFetcher,
    pub news_ttl: Duration,
    pub explain: ExplainSettings,
    pub max_upload_bytes: usize,
}

impl Default for StateBuilder {
    fn default() -> Self {
        Self {
            crop_model: Some(crop_model()),
            predictor: greenness_predictor(),
            catalog: Some(catalog()),
            fetcher: FixtureFetcher::default(),
            news_ttl: Duration::from_secs(900),
            explain: ExplainSettings {
                default_samples: 40,
                workers: 2,
                ..ExplainSettings::default()
            },
            max_upload_bytes: 1 << 20,
        }
    }
}

impl StateBuilder {
    pub fn build(self) -> Router {
        router(Arc::new(AppState::new(
            self.crop_model,
            fertilizer(),
            self.predictor,
            self.catalog,
            news_feed(self.fetcher, self.news_ttl),
            self.explain,
            self.max_upload_bytes,
        )))
    }
}

pub fn app() -> Router {
    StateBuilder::default().build()
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: axum::http::HeaderMap,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap_or_else(|e| {
            panic!(
                "body is not JSON ({e}): {}",
                String::from_utf8_lossy(&self.bytes)
            )
        })
    }

    pub fn error_code(&self) -> String {
        self.json()["error"]["code"]
            .as_str()
            .unwrap_or_default()
            .to_string()
    }
}

pub async fn send(app: &Router, req: Request<Body>) -> Reply {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX)
        .await
        .unwrap()
        .to_vec();
    Reply {
        status,
        headers,
        bytes,
    }
}

pub async fn get(app: &Router, path: &str) -> Reply {
    send(
        app,
        Request::get(path)
            .header(header::ORIGIN, "http://localhost:5173")
            .body(Body::empty())
            .unwrap(),
    )
    .await
}

pub async fn post_json(app: &Router, path: &str, body: impl Into<Body>) -> Reply {
    send(
        app,
        Request::post(path)
            .header(header::CONTENT_TYPE, "application/json")
            .header(header::ORIGIN, "http://localhost:5173")
            .body(body.into())
            .unwrap(),
    )
    .await
}

/// `(name, filename?, bytes)` parts.
pub fn multipart_body(parts: &[(&str, Option<&str>, &[u8])]) -> Vec<u8> {
    let mut out = Vec::new();
    for (name, filename, data) in parts {
        out.extend_from_slice(format!("--{BOUNDARY}\r\n").as_bytes());
        match filename {
            Some(f) => out.extend_from_slice(
                format!("Content-Disposition: form-data; name=\"{name}\"; filename=\"{f}\"\r\nContent-Type: application/octet-stream\r\n\r\n")
                    .as_bytes(),
            ),
            None => out.extend_from_slice(format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n").as_bytes()),
        }
        out.extend_from_slice(data);
        out.extend_from_slice(b"\r\n");
    }
    out.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    out
}

pub async fn post_multipart(
    app: &Router,
    path: &str,
    parts: &[(&str, Option<&str>, &[u8])],
) -> Reply {
    send(
        app,
        Request::post(path)
            .header(
                header::CONTENT_TYPE,
                format!("multipart/form-data; boundary={BOUNDARY}"),
            )
            .header(header::ORIGIN, "http://localhost:5173")
            .body(Body::from(multipart_body(parts)))
            .unwrap(),
    )
    .await
}

/// 96x80 "leaf": green ellipse with brown spots on a pale background.
pub fn leaf_png() -> Vec<u8> {
    RasterImage::from_fn(96, 80, |x, y| {
        let dx = (x as f64 - 48.0) / 40.0;
        let dy = (y as f64 - 40.0) / 30.0;
        if dx * dx + dy * dy > 1.0 {
            [235, 230, 220]
        } else if (x / 12 + y / 12) % 3 == 0 && (x % 12) < 5 && (y % 12) < 5 {
            [110, 70, 30]
        } else {
            [40, 150 + (x % 40) as u8, 50]
        }
    })
    .to_png()
    .unwrap()
}

pub fn schema(name: &str) -> jsonschema::Validator {
    let path = repo_root()
        .join("schemas")
        .join(format!("{name}.schema.json"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let value: Value = serde_json::from_str(&text).unwrap();
    jsonschema::validator_for(&value).unwrap()
}

pub fn assert_valid(schema_name: &str, instance: &Value) {
    let v = schema(schema_name);
    let errors: Vec<String> = v
        .iter_errors(instance)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect();
    assert!(errors.is_empty(), "{schema_name}: {errors:?}\n{instance:#}");
}

/// Asserts a non-2xx reply carries a well-formed error body.
pub fn assert_api_error(reply: &Reply) {
    assert!(
        !reply.status.is_success(),
        "expected an error, got {}",
        reply.status
    );
    let body = reply.json();
    assert_valid("error", &body);
}
