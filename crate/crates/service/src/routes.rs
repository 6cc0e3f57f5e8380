use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::multipart::MultipartRejection;
use axum::extract::rejection::BytesRejection;
use axum::extract::{Multipart, State};
use axum::http::{StatusCode, Uri};
use axum::Json;
use base64::Engine as _;
use serde_json::{json, Map, Value};

use agroml::explain::{self, LimeConfig, RasterImage};

use crate::error::ApiError;
use crate::state::{AppState, MODEL_INPUT_SIZE};

type ApiResult = Result<Json<Value>, ApiError>;

const CROP_FIELDS: [&str; 7] = ["n", "p", "k", "temperature", "humidity", "ph", "rainfall"];
const FERTILIZER_FIELDS: [&str; 4] = ["crop", "n", "p", "k"];
const TOP_PROBABILITIES: usize = 3;

fn body_rejection(e: BytesRejection, limit: usize) -> ApiError {
    if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
        ApiError::too_large(limit)
    } else {
        ApiError::invalid_body(e.body_text())
    }
}

/// Parses a JSON object and rejects keys outside `allowed`.
fn json_object(
    body: Result<Bytes, BytesRejection>,
    allowed: &[&str],
    limit: usize,
) -> Result<Map<String, Value>, ApiError> {
    let bytes = body.map_err(|e| body_rejection(e, limit))?;
    let value: Value = serde_json::from_slice(&bytes)
        .map_err(|e| ApiError::invalid_body(format!("body is not valid JSON: {e}")))?;
    let Value::Object(map) = value else {
        return Err(ApiError::invalid_body("body must be a JSON object"));
    };
    for field in allowed {
        if matches!(map.get(*field), None | Some(Value::Null)) {
            return Err(ApiError::missing_field(field));
        }
    }
    if let Some(extra) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(ApiError::invalid_field(
            extra,
            format!("unknown field `{extra}`"),
        ));
    }
    Ok(map)
}

/// JSON numbers, or strings holding one, as long as they are finite.
fn number(map: &Map<String, Value>, field: &str) -> Result<f64, ApiError> {
    let v = match &map[field] {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse::<f64>().ok(),
        _ => None,
    };
    v.filter(|v| v.is_finite())
        .ok_or_else(|| ApiError::non_numeric(field))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> T + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))
}

pub async fn crop_recommend(
    State(state): State<Arc<AppState>>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult {
    let map = json_object(body, &CROP_FIELDS, state.max_upload_bytes)?;
    let features = CROP_FIELDS
        .iter()
        .map(|f| number(&map, f))
        .collect::<Result<Vec<_>, _>>()?;
    let model = state
        .crop_model
        .as_ref()
        .ok_or_else(ApiError::model_not_loaded)?;
    let probs = model
        .predict_proba(&features)
        .map_err(|e| ApiError::internal(e.to_string()))?;
    let mut ranked: Vec<(usize, f64)> = probs.into_iter().enumerate().collect();
    // stable: equal probabilities keep class order
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    let names = model.class_names();
    let top: Vec<Value> = ranked
        .iter()
        .take(TOP_PROBABILITIES)
        .map(|&(c, p)| json!({ "label": names[c], "prob": p }))
        .collect();
    Ok(Json(
        json!({ "crop": names[ranked[0].0], "probabilities": top }),
    ))
}

pub async fn fertilizer_recommend(
    State(state): State<Arc<AppState>>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult {
    let map = json_object(body, &FERTILIZER_FIELDS, state.max_upload_bytes)?;
    let crop = match &map["crop"] {
        Value::String(s) if !s.trim().is_empty() => s.trim(),
        Value::String(_) => return Err(ApiError::missing_field("crop")),
        _ => {
            return Err(ApiError::invalid_field(
                "crop",
                "field `crop` must be a string",
            ))
        }
    };
    let (n, p, k) = (number(&map, "n")?, number(&map, "p")?, number(&map, "k")?);
    let rec = state.fertilizer.recommend(crop, n, p, k)?;
    Ok(Json(
        serde_json::to_value(rec).map_err(|e| ApiError::internal(e.to_string()))?,
    ))
}

pub async fn fertilizer_crops(State(state): State<Arc<AppState>>) -> ApiResult {
    let crops: Vec<&str> = state.fertilizer.table().crops().collect();
    Ok(Json(json!({ "crops": crops })))
}

/// Fields of an image upload form.
struct Upload {
    image: Vec<u8>,
    n_samples: Option<String>,
    seed: Option<String>,
}

async fn read_upload(
    form: Result<Multipart, MultipartRejection>,
    limit: usize,
) -> Result<Upload, ApiError> {
    let mut form = form.map_err(|e| ApiError::invalid_multipart(e.body_text()))?;
    let map_err = |e: axum::extract::multipart::MultipartError| {
        if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::too_large(limit)
        } else {
            ApiError::invalid_multipart(e.body_text())
        }
    };
    let mut upload = Upload {
        image: Vec::new(),
        n_samples: None,
        seed: None,
    };
    let mut seen_image = false;
    while let Some(mut field) = form.next_field().await.map_err(map_err)? {
        match field.name().unwrap_or("") {
            "image" => {
                seen_image = true;
                while let Some(chunk) = field.chunk().await.map_err(map_err)? {
                    if upload.image.len() + chunk.len() > limit {
                        return Err(ApiError::too_large(limit));
                    }
                    upload.image.extend_from_slice(&chunk);
                }
            }
            "n_samples" => upload.n_samples = Some(field.text().await.map_err(map_err)?),
            "seed" => upload.seed = Some(field.text().await.map_err(map_err)?),
            _ => {}
        }
    }
    if !seen_image {
        return Err(ApiError::missing_image());
    }
    Ok(upload)
}

fn decode_for_model(bytes: &[u8]) -> Result<RasterImage, ApiError> {
    let image = RasterImage::decode(bytes).map_err(|e| ApiError::undecodable(e.to_string()))?;
    Ok(image.resize(MODEL_INPUT_SIZE, MODEL_INPUT_SIZE))
}

pub async fn disease_predict(
    State(state): State<Arc<AppState>>,
    form: Result<Multipart, MultipartRejection>,
) -> ApiResult {
    let upload = read_upload(form, state.max_upload_bytes).await?;
    let image = decode_for_model(&upload.image)?;
    let catalog_loaded = state.catalog.is_some();
    if !catalog_loaded {
        return Err(ApiError::catalog_not_loaded());
    }
    let st = state.clone();
    let (idx, confidence) = blocking(move || st.predictor.predict(&image)).await??;
    let label = &state.predictor.labels()[idx];
    let resolved = state.catalog.as_ref().expect("checked").resolve(label);
    let e = resolved.entry;
    Ok(Json(json!({
        "label": label,
        "confidence": confidence,
        "display_name": e.display_name,
        "crop": e.crop,
        "disease": e.disease,
        "description": e.description,
        "remedy": e.remedy,
        "catalog_match": resolved.known,
    })))
}

fn sample_count(raw: Option<&str>, default: usize, max: usize) -> Result<usize, ApiError> {
    let Some(raw) = raw else { return Ok(default) };
    let invalid = || {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "InvalidSampleCount",
            format!("n_samples must be an integer between 2 and {max}"),
        )
        .with_details(json!({ "min": 2, "max": max }))
    };
    let n: usize = raw.trim().parse().map_err(|_| invalid())?;
    if !(2..=max).contains(&n) {
        return Err(invalid());
    }
    Ok(n)
}

pub async fn explain_image(
    State(state): State<Arc<AppState>>,
    form: Result<Multipart, MultipartRejection>,
) -> ApiResult {
    let started = Instant::now();
    let upload = read_upload(form, state.max_upload_bytes).await?;
    let settings = &state.explain;
    let n_samples = sample_count(
        upload.n_samples.as_deref(),
        settings.default_samples,
        settings.max_samples,
    )?;
    let seed = match upload.seed.as_deref() {
        None => 0,
        Some(s) => s
            .trim()
            .parse::<u64>()
            .map_err(|_| ApiError::invalid_field("seed", "seed must be a non-negative integer"))?,
    };
    let image = decode_for_model(&upload.image)?;

    let budget = settings.timeout;
    let budget_secs = budget.as_secs();
    let deadline = started + budget;
    let slots = state.explain_slots.clone();
    let st = state.clone();
    let work = async move {
        let permit = slots
            .acquire_owned()
            .await
            .map_err(|_| ApiError::internal("explanation pool closed"))?;
        blocking(move || {
            let _permit = permit;
            let (target, _) = st.predictor.predict(&image)?;
            let config = LimeConfig {
                n_samples,
                top_k: st.explain.top_k,
                seed,
                deadline: Some(deadline),
                ..LimeConfig::default()
            };
            let outcome = explain::explain(&image, &st.predictor, target, &config)
                .map_err(|e| ApiError::from_explain(e, budget_secs))?;
            let overlay = explain::render_overlay(&image, &outcome.segments, &outcome.explanation)
                .and_then(|img| img.to_png().map_err(Into::into))
                .map_err(|e| ApiError::internal(e.to_string()))?;
            Ok::<_, ApiError>((target, outcome, overlay))
        })
        .await?
    };
    // the explanation itself stops at `deadline`; the slack covers queueing
    // for a worker slot and the final encode
    let (target, outcome, png) = tokio::time::timeout(budget + Duration::from_secs(1), work)
        .await
        .map_err(|_| ApiError::explain_timeout(budget_secs, None))??;

    let segments: Vec<Value> = outcome
        .explanation
        .ranked_scores()
        .into_iter()
        .map(|(id, score)| json!({ "id": id, "score": score }))
        .collect();
    Ok(Json(json!({
        "label": state.predictor.labels()[target],
        "target_class": target,
        "overlay_data_uri": format!("data:image/png;base64,{}", base64::engine::general_purpose::STANDARD.encode(png)),
        "segments": segments,
        "segment_count": outcome.segments.segment_count(),
        "n_samples": outcome.explanation.n_samples,
        "seed": outcome.explanation.seed,
    })))
}

pub async fn news(State(state): State<Arc<AppState>>) -> ApiResult {
    let feed = state.news.clone();
    let snap = blocking(move || feed.get_articles(chrono::Utc::now())).await?;
    let mut body = json!({ "articles": snap.articles, "stale": snap.stale });
    if let Some(e) = &snap.last_error {
        body["last_error"] = json!(e);
    }
    if let Some(t) = snap.refreshed_at {
        body["refreshed_at"] = json!(t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    }
    Ok(Json(body))
}

pub async fn diseases(State(state): State<Arc<AppState>>) -> ApiResult {
    let catalog = state
        .catalog
        .as_ref()
        .ok_or_else(ApiError::catalog_not_loaded)?;
    let entries: Vec<_> = catalog.entries().collect();
    Ok(Json(json!({ "count": entries.len(), "diseases": entries })))
}

pub async fn health() -> Json<Value> {
    Json(json!({ "status": "ok", "version": env!("CARGO_PKG_VERSION") }))
}

pub async fn not_found(uri: Uri) -> ApiError {
    ApiError::not_found(uri.path())
}

pub async fn method_not_allowed() -> ApiError {
    ApiError::method_not_allowed()
}
