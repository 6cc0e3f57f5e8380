//! HTTP bridge to an out-of-process image classifier.
//!
//! Request: `{"image_b64": "...", "format": "png" | "jpeg"}`.
//! Reply: `{"labels": [...], "probs": [...]}`, parallel arrays.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use url::Url;

use super::{
    validate_distribution, validate_labels, ImagePredictor, PredictorError, PredictorKind,
};
use crate::explain::{ImageKind, RasterImage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalRequest {
    pub image_b64: String,
    pub format: ImageKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalReply {
    pub labels: Vec<String>,
    pub probs: Vec<f64>,
}

impl ExternalReply {
    pub fn validate(&self) -> Result<(), PredictorError> {
        if self.labels.len() != self.probs.len() {
            return Err(PredictorError::ProtocolViolation(format!(
                "{} labels but {} probabilities",
                self.labels.len(),
                self.probs.len()
            )));
        }
        validate_labels(&self.labels)
            .map_err(|e| PredictorError::ProtocolViolation(e.to_string()))?;
        validate_distribution(&self.probs, self.labels.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalConfig {
    pub endpoint: Url,
    pub timeout: Duration,
    /// Extra attempts after the first failure.
    pub retries: usize,
    pub retry_delay: Duration,
    pub max_in_flight: usize,
}

impl ExternalConfig {
    pub fn new(endpoint: Url) -> Self {
        Self {
            endpoint,
            timeout: Duration::from_secs(30),
            retries: 2,
            retry_delay: Duration::from_millis(200),
            max_in_flight: 8,
        }
    }
}

/// Counting gate bounding concurrent requests.
#[derive(Debug)]
struct Gate {
    free: Mutex<usize>,
    ready: Condvar,
}

impl Gate {
    fn enter(&self) -> GateGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.ready.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.ready.notify_one();
    }
}

#[derive(Debug)]
pub struct ExternalPredictor {
    config: ExternalConfig,
    labels: Vec<String>,
    client: reqwest::blocking::Client,
    gate: Gate,
}

impl ExternalPredictor {
    /// `labels` is the order callers expect; replies must carry the same
    /// label set (any order).
    pub fn new(config: ExternalConfig, labels: Vec<String>) -> Result<Self, PredictorError> {
        validate_labels(&labels)?;
        if config.max_in_flight == 0 {
            return Err(PredictorError::InvalidConfig(
                "max_in_flight must be positive".into(),
            ));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .user_agent(concat!("agroml/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| PredictorError::InvalidConfig(e.to_string()))?;
        Ok(Self {
            gate: Gate {
                free: Mutex::new(config.max_in_flight),
                ready: Condvar::new(),
            },
            config,
            labels,
            client,
        })
    }

    /// Sends one image (PNG-encoded) and returns the validated reply.
    pub fn call(&self, image: &RasterImage) -> Result<ExternalReply, PredictorError> {
        let png = image
            .to_png()
            .map_err(|e| PredictorError::ProtocolViolation(e.to_string()))?;
        self.call_encoded(&png, ImageKind::Png)
    }

    pub fn call_encoded(
        &self,
        bytes: &[u8],
        format: ImageKind,
    ) -> Result<ExternalReply, PredictorError> {
        let request = ExternalRequest {
            image_b64: base64::engine::general_purpose::STANDARD.encode(bytes),
            format,
        };
        let _slot = self.gate.enter();
        let attempts = self.config.retries + 1;
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self
                .client
                .post(self.config.endpoint.clone())
                .json(&request)
                .send()
            {
                Ok(resp) if resp.status().is_success() => {
                    let body = resp.bytes().map_err(|e| {
                        PredictorError::ProtocolViolation(format!("reading reply: {e}"))
                    })?;
                    let reply: ExternalReply = serde_json::from_slice(&body).map_err(|e| {
                        PredictorError::ProtocolViolation(format!("malformed reply: {e}"))
                    })?;
                    reply.validate()?;
                    return Ok(reply);
                }
                Ok(resp) if resp.status().is_client_error() => {
                    return Err(PredictorError::ProtocolViolation(format!(
                        "endpoint answered {}",
                        resp.status()
                    )));
                }
                Ok(resp) => last = format!("endpoint answered {}", resp.status()),
                Err(e) => last = e.to_string(),
            }
            if attempt < attempts {
                std::thread::sleep(self.config.retry_delay);
            }
        }
        Err(PredictorError::ExternalUnavailable {
            attempts,
            message: last,
        })
    }
}

impl ImagePredictor for ExternalPredictor {
    fn kind(&self) -> PredictorKind {
        PredictorKind::External
    }

    fn labels(&self) -> &[String] {
        &self.labels
    }

    fn predict_proba(&self, image: &RasterImage) -> Result<Vec<f64>, PredictorError> {
        let reply = self.call(image)?;
        if reply.labels.len() != self.labels.len() {
            return Err(PredictorError::ProtocolViolation(format!(
                "reply has {} labels, expected {}",
                reply.labels.len(),
                self.labels.len()
            )));
        }
        self.labels
            .iter()
            .map(|l| {
                reply
                    .labels
                    .iter()
                    .position(|r| r == l)
                    .map(|i| reply.probs[i])
                    .ok_or_else(|| {
                        PredictorError::ProtocolViolation(format!("reply is missing label `{l}`"))
                    })
            })
            .collect()
    }
}
