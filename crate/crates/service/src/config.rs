//! Service configuration: a TOML file plus `AGROML_*` environment overrides.
//!
//! Relative paths in the file resolve against the file's directory; paths
//! from the environment resolve against the working directory.

use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;
use url::Url;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Unreadable { path: String, message: String },
    #[error("config {path} does not parse: {message}")]
    Parse { path: String, message: String },
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("`{field}` points to {path}, which does not exist")]
    MissingPath { field: String, path: String },
    #[error("cannot load `{field}` from {path}: {message}")]
    Load {
        field: String,
        path: String,
        message: String,
    },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorSource {
    Reference,
    External,
    /// Uniform output over the catalog labels; for wiring checks.
    Stub,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictorSection {
    pub kind: PredictorSource,
    /// Reference predictor artifact.
    pub model: Option<PathBuf>,
    pub endpoint: Option<Url>,
    pub timeout_secs: u64,
    pub retries: usize,
    pub max_in_flight: usize,
}

impl Default for PredictorSection {
    fn default() -> Self {
        Self {
            kind: PredictorSource::Reference,
            model: None,
            endpoint: None,
            timeout_secs: 30,
            retries: 2,
            max_in_flight: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplainSection {
    /// Perturbation count when a request does not give one.
    pub samples: usize,
    pub max_samples: usize,
    pub top_k: usize,
    pub timeout_secs: u64,
    /// Concurrent explanations; 0 means one per core.
    pub workers: usize,
}

impl Default for ExplainSection {
    fn default() -> Self {
        Self {
            samples: 249,
            max_samples: 5000,
            top_k: 10,
            timeout_secs: 60,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewsSection {
    pub urls: Vec<String>,
    pub keywords: Vec<String>,
    pub ttl_secs: u64,
    pub retry_secs: u64,
    pub fetch_timeout_secs: u64,
}

impl Default for NewsSection {
    fn default() -> Self {
        Self {
            urls: Vec::new(),
            keywords: agroml::newsfeed::DEFAULT_KEYWORDS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            ttl_secs: agroml::newsfeed::DEFAULT_TTL.as_secs(),
            retry_secs: 60,
            fetch_timeout_secs: 15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub bind: IpAddr,
    pub port: u16,
    pub max_upload_bytes: usize,
    /// Seconds to let in-flight requests finish after a shutdown signal.
    pub shutdown_grace_secs: u64,
    pub crop_model: Option<PathBuf>,
    pub fertilizer_csv: PathBuf,
    pub fertilizer_advice: Option<PathBuf>,
    pub disease_catalog: PathBuf,
    pub predictor: PredictorSection,
    pub explain: ExplainSection,
    pub news: NewsSection,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: IpAddr::from([127, 0, 0, 1]),
            port: 8080,
            max_upload_bytes: 10 * 1024 * 1024,
            shutdown_grace_secs: 10,
            crop_model: None,
            fertilizer_csv: PathBuf::from("data/fertilizer.csv"),
            fertilizer_advice: None,
            disease_catalog: PathBuf::from("data/disease_catalog.toml"),
            predictor: PredictorSection::default(),
            explain: ExplainSection::default(),
            news: NewsSection::default(),
        }
    }
}

impl ServiceConfig {
    /// Reads the file, applies process environment overrides and validates.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let mut config = Self::from_file(path.as_ref())?;
        config.apply_env(|k| std::env::var(k).ok())?;
        config.validate()?;
        Ok(config)
    }

    /// Parses without applying the environment or validating.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut config: Self = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.message().to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.fertilizer_csv);
        fix(&mut self.disease_catalog);
        for p in [
            &mut self.crop_model,
            &mut self.fertilizer_advice,
            &mut self.predictor.model,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// Overrides from `AGROML_BIND`, `AGROML_PORT`, `AGROML_CROP_MODEL`,
    /// `AGROML_PREDICTOR_MODEL`, `AGROML_PREDICTOR_ENDPOINT`,
    /// `AGROML_FERTILIZER_CSV`, `AGROML_FERTILIZER_ADVICE` and
    /// `AGROML_DISEASE_CATALOG`.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = var("AGROML_BIND") {
            self.bind = v
                .parse()
                .map_err(|_| invalid("AGROML_BIND", format!("`{v}` is not an IP address")))?;
        }
        if let Some(v) = var("AGROML_PORT") {
            self.port = v
                .parse()
                .map_err(|_| invalid("AGROML_PORT", format!("`{v}` is not a port number")))?;
        }
        if let Some(v) = var("AGROML_CROP_MODEL") {
            self.crop_model = Some(v.into());
        }
        if let Some(v) = var("AGROML_PREDICTOR_MODEL") {
            self.predictor.model = Some(v.into());
        }
        if let Some(v) = var("AGROML_PREDICTOR_ENDPOINT") {
            self.predictor.endpoint = Some(
                Url::parse(&v).map_err(|e| invalid("AGROML_PREDICTOR_ENDPOINT", e.to_string()))?,
            );
        }
        if let Some(v) = var("AGROML_FERTILIZER_CSV") {
            self.fertilizer_csv = v.into();
        }
        if let Some(v) = var("AGROML_FERTILIZER_ADVICE") {
            self.fertilizer_advice = Some(v.into());
        }
        if let Some(v) = var("AGROML_DISEASE_CATALOG") {
            self.disease_catalog = v.into();
        }
        Ok(())
    }

    /// Checks ranges and that every referenced file exists.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_upload_bytes == 0 {
            return Err(invalid("max_upload_bytes", "must be positive"));
        }
        if self.explain.samples < 2 {
            return Err(invalid("explain.samples", "must be at least 2"));
        }
        if self.explain.max_samples < self.explain.samples {
            return Err(invalid(
                "explain.max_samples",
                "must be at least explain.samples",
            ));
        }
        if self.explain.timeout_secs == 0 {
            return Err(invalid("explain.timeout_secs", "must be positive"));
        }
        if self.news.ttl_secs == 0 {
            return Err(invalid("news.ttl_secs", "must be positive"));
        }
        for u in &self.news.urls {
            Url::parse(u).map_err(|e| invalid("news.urls", format!("`{u}`: {e}")))?;
        }
        let exists = |field: &str, p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(ConfigError::MissingPath {
                    field: field.to_string(),
                    path: p.display().to_string(),
                })
            }
        };
        exists("fertilizer_csv", &self.fertilizer_csv)?;
        exists("disease_catalog", &self.disease_catalog)?;
        if let Some(p) = &self.crop_model {
            exists("crop_model", p)?;
        }
        if let Some(p) = &self.fertilizer_advice {
            exists("fertilizer_advice", p)?;
        }
        match self.predictor.kind {
            PredictorSource::Reference => match &self.predictor.model {
                Some(p) => exists("predictor.model", p)?,
                None => {
                    return Err(invalid(
                        "predictor.model",
                        "required when predictor.kind = \"reference\"",
                    ))
                }
            },
            PredictorSource::External => {
                if self.predictor.endpoint.is_none() {
                    return Err(invalid(
                        "predictor.endpoint",
                        "required when predictor.kind = \"external\"",
                    ));
                }
                if self.predictor.max_in_flight == 0 {
                    return Err(invalid("predictor.max_in_flight", "must be positive"));
                }
            }
            PredictorSource::Stub => {}
        }
        Ok(())
    }

    pub fn socket_addr(&self) -> SocketAddr {
        SocketAddr::new(self.bind, self.port)
    }

    pub fn explain_timeout(&self) -> Duration {
        Duration::from_secs(self.explain.timeout_secs)
    }

    pub fn explain_workers(&self) -> usize {
        match self.explain.workers {
            0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
            n => n,
        }
    }
}
