//! HTTP interface over [`prefpcp_core::pipeline::Analysis`].
//!
//! | Method | Path | Body |
//! |---|---|---|
//! | `POST` | `/datasets?method=&seed=&grid=` | CSV or JSON dataset |
//! | `GET` | `/datasets/{id}/radar-grid` | |
//! | `POST` | `/datasets/{id}/preference?top_k=` | `{"cell":[i,j]}` or `{"f_r":[..]}` |
//!
//! Handlers only parse, call the library and serialize its result.

mod handlers;
mod store;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;
use prefpcp_core::pcpmodel::DEFAULT_TOP_K;
use prefpcp_core::EmbedOptions;

pub use handlers::ApiError;
pub use store::{dataset_id, SessionStore};

pub const DEFAULT_ADDR: &str = "127.0.0.1:8371";
pub const DEFAULT_SESSION_CAP: usize = 16;
const MAX_UPLOAD_BYTES: usize = 64 * 1024 * 1024;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub addr: SocketAddr,
    /// Datasets kept in memory before the least recently used is dropped.
    pub session_cap: usize,
    /// Used when an upload leaves `method`, `seed` or `grid` unset.
    pub embed: EmbedOptions,
    pub top_k: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            addr: DEFAULT_ADDR.parse().expect("valid default address"),
            session_cap: DEFAULT_SESSION_CAP,
            embed: EmbedOptions::default(),
            top_k: DEFAULT_TOP_K,
        }
    }
}

pub struct AppState {
    pub config: ServiceConfig,
    pub sessions: SessionStore,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        let sessions = SessionStore::new(config.session_cap);
        Self { config, sessions }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/datasets", post(handlers::upload))
        .route("/datasets/{id}/radar-grid", get(handlers::radar_grid))
        .route("/datasets/{id}/preference", post(handlers::preference))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

/// Binds `config.addr` and serves until ctrl-c.
pub async fn serve(config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    let app = router(Arc::new(AppState::new(config)));
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
