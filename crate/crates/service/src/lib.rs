//! HTTP/JSON consultation service.
//!
//! Knowledge bases are loaded once from a directory at startup; sessions
//! live in memory, are serialized per session and evicted after an idle
//! timeout. See `API.md` at the repository root for the endpoint reference.

mod catalog;
mod error;
mod routes;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::Router;
use knet_core::Session;
use tokio::net::TcpListener;
use tokio::sync::Mutex;

pub use catalog::{CatalogError, KbCatalog, Rejected};
pub use error::ApiError;
pub use routes::router;

pub const DEFAULT_PORT: u16 = 8628;
pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(3600);

#[derive(Debug, Clone)]
pub struct Config {
    pub kb_dir: PathBuf,
    pub host: String,
    pub port: u16,
    pub session_ttl: Duration,
    /// Directory of static assets (a built front end) served at `/`.
    pub static_dir: Option<PathBuf>,
}

impl Config {
    pub fn new(kb_dir: impl Into<PathBuf>) -> Self {
        Config {
            kb_dir: kb_dir.into(),
            host: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            session_ttl: DEFAULT_SESSION_TTL,
            static_dir: None,
        }
    }
}

pub(crate) struct Slot {
    pub(crate) session: Mutex<Session>,
    last_used: std::sync::Mutex<Instant>,
}

impl Slot {
    fn touch(&self) {
        *self.last_used.lock().expect("clock lock") = Instant::now();
    }

    fn idle_for(&self, now: Instant) -> Duration {
        now.saturating_duration_since(*self.last_used.lock().expect("clock lock"))
    }
}

/// Catalog plus live sessions. Cheap to clone.
#[derive(Clone)]
pub struct AppState {
    pub(crate) catalog: Arc<KbCatalog>,
    sessions: Arc<std::sync::Mutex<HashMap<String, Arc<Slot>>>>,
    ttl: Duration,
}

impl AppState {
    pub fn new(catalog: KbCatalog, ttl: Duration) -> Self {
        AppState { catalog: Arc::new(catalog), sessions: Default::default(), ttl }
    }

    pub fn catalog(&self) -> &KbCatalog {
        &self.catalog
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session table lock").len()
    }

    pub(crate) fn insert(&self, session: Session) -> String {
        let id = session.id().to_owned();
        let slot = Slot { session: Mutex::new(session), last_used: std::sync::Mutex::new(Instant::now()) };
        self.sessions.lock().expect("session table lock").insert(id.clone(), Arc::new(slot));
        id
    }

    /// The session's slot, unless it is missing or has been idle too long.
    pub(crate) fn get(&self, id: &str) -> Option<Arc<Slot>> {
        let mut table = self.sessions.lock().expect("session table lock");
        let slot = table.get(id)?.clone();
        if slot.idle_for(Instant::now()) > self.ttl {
            table.remove(id);
            return None;
        }
        slot.touch();
        Some(slot)
    }

    /// Drops sessions idle for longer than the TTL; returns how many.
    pub fn evict_idle(&self) -> usize {
        let now = Instant::now();
        let mut table = self.sessions.lock().expect("session table lock");
        let before = table.len();
        table.retain(|_, slot| slot.idle_for(now) <= self.ttl);
        before - table.len()
    }
}

/// Loads the catalog, binds, and serves until the process is stopped.
pub async fn run(config: Config) -> std::io::Result<()> {
    let catalog = KbCatalog::load(&config.kb_dir).map_err(std::io::Error::other)?;
    for r in catalog.rejected() {
        tracing::warn!(file = %r.path.display(), error = %r.reason, "knowledge base excluded");
    }
    tracing::info!(count = catalog.len(), dir = %config.kb_dir.display(), "knowledge bases loaded");
    let state = AppState::new(catalog, config.session_ttl);
    spawn_evictor(state.clone());
    let app = router(state, config.static_dir.as_deref());
    let listener = TcpListener::bind((config.host.as_str(), config.port)).await?;
    let addr: SocketAddr = listener.local_addr()?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, app).with_graceful_shutdown(shutdown_signal()).await
}

/// The router alone, for embedding or tests.
pub fn app(catalog: KbCatalog) -> Router {
    router(AppState::new(catalog, DEFAULT_SESSION_TTL), None)
}

fn spawn_evictor(state: AppState) {
    let period = (state.ttl / 4).clamp(Duration::from_secs(1), Duration::from_secs(60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let n = state.evict_idle();
            if n > 0 {
                tracing::debug!(evicted = n, "idle sessions dropped");
            }
        }
    });
}

async fn shutdown_signal() {
    let _ = tokio::signal::ctrl_c().await;
}
