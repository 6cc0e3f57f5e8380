use std::sync::Arc;
use std::time::Duration;

use tokio::sync::Semaphore;

use agroml::fertilizer::{load_ideal_table, AdviceCatalog, FertilizerEngine};
use agroml::newsfeed::{FeedConfig, FeedFetcher, HttpFetcher, NewsFeed};
use agroml::predictor::{
    DiseaseCatalog, ExternalConfig, ExternalPredictor, PredictorHandle, ReferencePredictor,
    StubPredictor,
};
use agroml::TrainedClassifier;

use crate::config::{ConfigError, PredictorSource, ServiceConfig};

/// Side length images are resized to before prediction and explanation.
pub const MODEL_INPUT_SIZE: u32 = 224;

#[derive(Debug, Clone, PartialEq)]
pub struct ExplainSettings {
    pub default_samples: usize,
    pub max_samples: usize,
    pub top_k: usize,
    pub timeout: Duration,
    pub workers: usize,
}

impl Default for ExplainSettings {
    fn default() -> Self {
        Self {
            default_samples: 249,
            max_samples: 5000,
            top_k: 10,
            timeout: Duration::from_secs(60),
            workers: 1,
        }
    }
}

/// Artifacts shared by all handlers. Loaded once, never mutated.
pub struct AppState {
    pub crop_model: Option<TrainedClassifier>,
    pub fertilizer: FertilizerEngine,
    pub predictor: PredictorHandle,
    pub catalog: Option<DiseaseCatalog>,
    pub news: Arc<NewsFeed>,
    pub explain: ExplainSettings,
    pub max_upload_bytes: usize,
    pub(crate) explain_slots: Arc<Semaphore>,
}

impl std::fmt::Debug for AppState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AppState")
            .field(
                "crop_model",
                &self.crop_model.as_ref().map(|m| m.spec().name()),
            )
            .field("predictor", &self.predictor.kind())
            .field("explain", &self.explain)
            .finish_non_exhaustive()
    }
}

impl AppState {
    pub fn new(
        crop_model: Option<TrainedClassifier>,
        fertilizer: FertilizerEngine,
        predictor: PredictorHandle,
        catalog: Option<DiseaseCatalog>,
        news: NewsFeed,
        explain: ExplainSettings,
        max_upload_bytes: usize,
    ) -> Self {
        let workers = explain.workers.max(1);
        Self {
            crop_model,
            fertilizer,
            predictor,
            catalog,
            news: Arc::new(news),
            explain,
            max_upload_bytes,
            explain_slots: Arc::new(Semaphore::new(workers)),
        }
    }

    /// Loads every artifact named by a validated config.
    pub fn from_config(config: &ServiceConfig) -> Result<Self, ConfigError> {
        let fetcher = HttpFetcher::new(Duration::from_secs(config.news.fetch_timeout_secs))
            .map_err(|e| load_err("news", "", e))?;
        Self::from_config_with_fetcher(config, Box::new(fetcher))
    }

    pub fn from_config_with_fetcher(
        config: &ServiceConfig,
        fetcher: Box<dyn FeedFetcher>,
    ) -> Result<Self, ConfigError> {
        let crop_model = match &config.crop_model {
            Some(p) => Some(TrainedClassifier::load(p).map_err(|e| load_err("crop_model", p, e))?),
            None => None,
        };

        let table = load_ideal_table(&config.fertilizer_csv)
            .map_err(|e| load_err("fertilizer_csv", &config.fertilizer_csv, e))?;
        let advice = match &config.fertilizer_advice {
            Some(p) => AdviceCatalog::load(p).map_err(|e| load_err("fertilizer_advice", p, e))?,
            None => AdviceCatalog::default(),
        };

        let catalog = DiseaseCatalog::load(&config.disease_catalog)
            .map_err(|e| load_err("disease_catalog", &config.disease_catalog, e))?;

        let p = &config.predictor;
        let predictor = match p.kind {
            PredictorSource::Reference => {
                let path = p.model.as_ref().expect("validated");
                ReferencePredictor::load(path)
                    .and_then(PredictorHandle::new)
                    .map_err(|e| load_err("predictor.model", path, e))
            }
            PredictorSource::External => {
                let endpoint = p.endpoint.clone().expect("validated");
                let mut ext = ExternalConfig::new(endpoint.clone());
                ext.timeout = Duration::from_secs(p.timeout_secs);
                ext.retries = p.retries;
                ext.max_in_flight = p.max_in_flight;
                ExternalPredictor::new(ext, catalog.labels())
                    .and_then(PredictorHandle::new)
                    .map_err(|e| load_err("predictor.endpoint", endpoint.as_str(), e))
            }
            PredictorSource::Stub => StubPredictor::uniform(catalog.labels())
                .and_then(PredictorHandle::new)
                .map_err(|e| load_err("predictor", "", e)),
        }?;
        if let Err(e) = catalog.check_covers(predictor.labels()) {
            log::warn!("{e}; those predictions are served with a generic catalog entry");
        }

        let news = NewsFeed::new(
            FeedConfig {
                urls: config.news.urls.clone(),
                keywords: config.news.keywords.clone(),
                ttl: Duration::from_secs(config.news.ttl_secs),
                retry_interval: Duration::from_secs(config.news.retry_secs),
            },
            fetcher,
        );

        Ok(Self::new(
            crop_model,
            FertilizerEngine::new(table, advice),
            predictor,
            Some(catalog),
            news,
            ExplainSettings {
                default_samples: config.explain.samples,
                max_samples: config.explain.max_samples,
                top_k: config.explain.top_k,
                timeout: config.explain_timeout(),
                workers: config.explain_workers(),
            },
            config.max_upload_bytes,
        ))
    }
}

fn load_err(
    field: &str,
    path: impl AsRef<std::path::Path>,
    e: impl std::fmt::Display,
) -> ConfigError {
    ConfigError::Load {
        field: field.to_string(),
        path: path.as_ref().display().to_string(),
        message: e.to_string(),
    }
}
