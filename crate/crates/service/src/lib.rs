//! HTTP front end for the mood-board engine.
//!
//! JSON API under `/v1`, image bytes under `/v1/images/{id}`, and optional
//! static UI assets for everything else.

mod error;
mod handlers;
mod state;

use std::future::Future;
use std::time::Instant;

use axum::extract::{MatchedPath, Request};
use axum::middleware::{self, Next};
use axum::response::Response;
use axum::routing::{get, post};
use axum::Router;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;

pub use error::ApiError;
pub use state::{AppState, ServiceConfig, DEFAULT_SESSION_TTL, MAX_K};

/// Builds the application router.
pub fn router(state: AppState) -> Router {
    let static_dir = state.config().static_dir.clone();
    let api = Router::new()
        .route("/v1/sessions", post(handlers::create_session))
        .route("/v1/sessions/{id}", get(handlers::get_session))
        .route("/v1/sessions/{id}/search", post(handlers::search))
        .route("/v1/sessions/{id}/compose", post(handlers::compose))
        .route("/v1/sessions/{id}/pins", post(handlers::pin))
        .route("/v1/sessions/{id}/board", post(handlers::board))
        .route("/v1/images/{id}", get(handlers::image))
        .with_state(state);
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(handlers::not_found),
    };
    app.layer(middleware::from_fn(log_requests))
}

async fn log_requests(req: Request, next: Next) -> Response {
    let started = Instant::now();
    let method = req.method().clone();
    // Log the route template rather than the raw path so session ids stay
    // out of the logs.
    let path = req
        .extensions()
        .get::<MatchedPath>()
        .map(|p| p.as_str().to_owned())
        .unwrap_or_else(|| req.uri().path().to_owned());
    let response = next.run(req).await;
    tracing::info!(
        %method,
        path,
        status = response.status().as_u16(),
        latency_ms = started.elapsed().as_secs_f64() * 1000.0,
        "request"
    );
    response
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
