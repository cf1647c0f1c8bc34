//! Session service for the energy-transition game.
//!
//! Sessions are event sourced: the store keeps each session's seed and its
//! action log, and every state is rebuilt by replaying that log through the
//! engine. [`SessionService`] is the transport-free core; [`http`] puts it on
//! the network.

pub mod config;
pub mod http;
pub mod service;
pub mod store;

use std::sync::Arc;

use thiserror::Error;
use tokio::net::TcpListener;
use transition_core::Model;

pub use config::{ConfigError, ServerConfig, Storage};
pub use http::{router, AppState};
pub use service::{
    acceptable_name, assign_frame, ActionResponse, CreateSession, ExportFilter, ExportRecord, PolicyTiming, PostAction,
    ServiceError, SessionService, SessionStatus, SessionView, ShockTiming,
};
pub use store::{EventStore, FileStore, LeaderboardEntry, MemoryStore, SessionHeader, StoreError, StoredSession};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: std::net::SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// Opens the store, replays it and returns a router ready to be served.
pub fn build_app(model: Arc<Model>, config: &ServerConfig) -> Result<(Arc<SessionService>, axum::Router), ServeError> {
    let store = config.storage.open()?;
    let service = Arc::new(SessionService::open(model, store)?);
    let app = router(AppState {
        service: service.clone(),
        researcher_secret: config.research_secret.as_deref().map(Arc::from),
    });
    Ok((service, app))
}

/// Serves until `shutdown` resolves. Every action is durable before its
/// response is sent, so stopping only has to drain in-flight requests.
pub async fn serve_with_shutdown(
    model: Arc<Model>,
    config: ServerConfig,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    let (service, app) = build_app(model, &config)?;
    let listener = TcpListener::bind(config.listen)
        .await
        .map_err(|source| ServeError::Bind {
            addr: config.listen,
            source,
        })?;
    tracing::info!(
        addr = %listener.local_addr()?,
        sessions = service.session_count(),
        "session service listening"
    );
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    tracing::info!("session service stopped");
    Ok(())
}

/// Serves until SIGINT or SIGTERM.
pub async fn serve(model: Arc<Model>, config: ServerConfig) -> Result<(), ServeError> {
    serve_with_shutdown(model, config, shutdown_signal()).await
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}
