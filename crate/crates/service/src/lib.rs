//! HTTP JSON API over the agroml core: crop and fertilizer recommendation,
//! leaf-disease prediction with LIME explanations, a disease catalog and
//! agriculture news.
//!
//! All routes live under `/api`. Errors are always
//! `{"error": {"code", "message", "details"?}}`; the JSON schemas for every
//! body are in the repository's `schemas/` directory.

pub mod config;
pub mod error;
pub mod routes;
pub mod state;

use std::future::{Future, IntoFuture};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::DefaultBodyLimit;
use axum::http::{header, Method};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::Router;
use tower_http::catch_panic::CatchPanicLayer;
use tower_http::cors::{Any, CorsLayer};

pub use config::{ConfigError, ServiceConfig};
pub use error::ApiError;
pub use state::{AppState, ExplainSettings, MODEL_INPUT_SIZE};

/// Room for multipart boundaries and the small text fields next to the image.
const MULTIPART_OVERHEAD: usize = 64 * 1024;

fn panic_response(_: Box<dyn std::any::Any + Send + 'static>) -> axum::response::Response {
    ApiError::internal("request handler panicked").into_response()
}

pub fn router(state: Arc<AppState>) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers([header::CONTENT_TYPE, header::ACCEPT]);
    let limit = state.max_upload_bytes.saturating_add(MULTIPART_OVERHEAD);
    let api = Router::new()
        .route("/crop-recommend", post(routes::crop_recommend))
        .route("/fertilizer-recommend", post(routes::fertilizer_recommend))
        .route("/fertilizer/crops", get(routes::fertilizer_crops))
        .route("/disease-predict", post(routes::disease_predict))
        .route("/explain", post(routes::explain_image))
        .route("/news", get(routes::news))
        .route("/diseases", get(routes::diseases))
        .route("/health", get(routes::health));
    Router::new()
        .nest("/api", api)
        .fallback(routes::not_found)
        .method_not_allowed_fallback(routes::method_not_allowed)
        .layer(DefaultBodyLimit::max(limit))
        .layer(CatchPanicLayer::custom(panic_response))
        .layer(cors)
        .with_state(state)
}

/// Serves until `shutdown` resolves, then gives in-flight requests up to
/// `grace` to finish.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
    grace: Duration,
) -> std::io::Result<()> {
    let (signalled_tx, signalled_rx) = tokio::sync::oneshot::channel::<()>();
    let server = axum::serve(listener, router(state)).with_graceful_shutdown(async move {
        shutdown.await;
        let _ = signalled_tx.send(());
    });
    let server = server.into_future();
    tokio::pin!(server);
    tokio::select! {
        res = &mut server => res,
        _ = async {
            if signalled_rx.await.is_ok() {
                tokio::time::sleep(grace).await;
            } else {
                std::future::pending::<()>().await;
            }
        } => {
            log::warn!("in-flight requests did not finish within {grace:?}; exiting anyway");
            Ok(())
        }
    }
}
