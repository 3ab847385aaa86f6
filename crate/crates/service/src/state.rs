use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use gaudi_core::{Catalog, CompletionProvider, EmbedProvider, SamplingConfig, Session, StoryExample};
use rand::rngs::OsRng;
use rand::RngCore;

use crate::error::ApiError;

pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(2 * 60 * 60);
pub const MAX_K: usize = 100;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Sessions idle longer than this are evicted on the next access.
    pub session_ttl: Duration,
    /// Base directory for relative image paths.
    pub image_root: Option<PathBuf>,
    /// Directory of static UI assets served for non-API paths.
    pub static_dir: Option<PathBuf>,
    pub story_example: StoryExample,
    pub sampling: SamplingConfig,
    pub llm_model: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            session_ttl: DEFAULT_SESSION_TTL,
            image_root: None,
            static_dir: None,
            story_example: StoryExample::coffee_brand(),
            sampling: SamplingConfig::default(),
            llm_model: "davinci-002".into(),
        }
    }
}

pub(crate) type SharedSession = Arc<tokio::sync::Mutex<Session>>;

struct Slot {
    session: SharedSession,
    last_used: Instant,
}

/// Shared server state. Cloning is cheap.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    catalog: OnceLock<Arc<Catalog>>,
    embedder: Arc<dyn EmbedProvider>,
    completer: Option<Arc<dyn CompletionProvider>>,
    sessions: Mutex<HashMap<String, Slot>>,
    config: ServiceConfig,
}

impl AppState {
    pub fn new(
        embedder: Arc<dyn EmbedProvider>,
        completer: Option<Arc<dyn CompletionProvider>>,
        config: ServiceConfig,
    ) -> Self {
        Self {
            inner: Arc::new(Inner {
                catalog: OnceLock::new(),
                embedder,
                completer,
                sessions: Mutex::new(HashMap::new()),
                config,
            }),
        }
    }

    pub fn with_catalog(self, catalog: Catalog) -> Self {
        self.load_catalog(catalog);
        self
    }

    /// Installs the catalog. Returns `false` if one was already loaded.
    pub fn load_catalog(&self, catalog: Catalog) -> bool {
        self.inner.catalog.set(Arc::new(catalog)).is_ok()
    }

    pub fn catalog(&self) -> Result<Arc<Catalog>, ApiError> {
        self.inner
            .catalog
            .get()
            .cloned()
            .ok_or_else(ApiError::catalog_unavailable)
    }

    pub fn embedder(&self) -> Arc<dyn EmbedProvider> {
        self.inner.embedder.clone()
    }

    pub fn completer(&self) -> Option<Arc<dyn CompletionProvider>> {
        self.inner.completer.clone()
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    pub fn create_session(&self) -> String {
        let mut bytes = [0u8; 16];
        OsRng.fill_bytes(&mut bytes);
        let id = URL_SAFE_NO_PAD.encode(bytes);
        let mut sessions = self.inner.sessions.lock().expect("session map poisoned");
        self.evict_expired(&mut sessions);
        sessions.insert(
            id.clone(),
            Slot {
                session: Arc::new(tokio::sync::Mutex::new(Session::new(id.clone()))),
                last_used: Instant::now(),
            },
        );
        id
    }

    pub(crate) fn session(&self, id: &str) -> Result<SharedSession, ApiError> {
        let mut sessions = self.inner.sessions.lock().expect("session map poisoned");
        self.evict_expired(&mut sessions);
        let slot = sessions
            .get_mut(id)
            .ok_or_else(|| ApiError::session_not_found(id))?;
        slot.last_used = Instant::now();
        Ok(slot.session.clone())
    }

    pub fn session_count(&self) -> usize {
        self.inner.sessions.lock().expect("session map poisoned").len()
    }

    fn evict_expired(&self, sessions: &mut HashMap<String, Slot>) {
        let ttl = self.inner.config.session_ttl;
        sessions.retain(|_, slot| slot.last_used.elapsed() < ttl);
    }
}
