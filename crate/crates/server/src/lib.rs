//! HTTP service for botshaping sessions.

pub mod api;
pub mod config;

use std::net::SocketAddr;

use axum::http::{header, HeaderValue, Method};
use axum::Router;
use botshape_core::persistence::{FileStore, StoreError};
use thiserror::Error;
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

pub use api::{router, AppState};
pub use config::{BackendKind, ConceptSourceKind, ConfigError, ServerConfig};

#[derive(Debug, Error)]
pub enum ServerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
    #[error("invalid CORS origin {0:?}")]
    CorsOrigin(String),
    #[error("server failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Builds the engine and store from `config` and returns the full application.
pub fn build_app(config: &ServerConfig) -> Result<(Router, AppState), ServerError> {
    let engine = config.build_engine()?;
    let store = FileStore::open(&config.store_dir)?;
    let state = AppState::new(engine, store);
    let mut app = router(state.clone());
    if let Some(dir) = &config.static_dir {
        app = app.fallback_service(ServeDir::new(dir));
    }
    if let Some(origin) = &config.cors_origin {
        let value =
            HeaderValue::from_str(origin).map_err(|_| ServerError::CorsOrigin(origin.clone()))?;
        app = app.layer(
            CorsLayer::new()
                .allow_origin(value)
                .allow_methods([Method::GET, Method::POST, Method::DELETE])
                .allow_headers([header::CONTENT_TYPE]),
        );
    }
    Ok((app, state))
}

/// Serves on an already bound listener until the task is dropped.
pub async fn serve_on(listener: tokio::net::TcpListener, app: Router) -> Result<(), ServerError> {
    axum::serve(listener, app).await?;
    Ok(())
}

pub async fn serve(config: ServerConfig) -> Result<(), ServerError> {
    let (app, _) = build_app(&config)?;
    let listener = tokio::net::TcpListener::bind(&config.bind)
        .await
        .map_err(|source| ServerError::Bind {
            addr: config.bind.clone(),
            source,
        })?;
    let addr: SocketAddr = listener.local_addr()?;
    tracing::info!(%addr, store = %config.store_dir.display(), "listening");
    serve_on(listener, app).await
}
