//! HTTP review service for content-consistency labeling.
//!
//! Curators label each triplet `high` or `low`. Every label is appended to a
//! line-delimited [`LabelRecord`] log, which is the same file stage-2
//! composition reads. Progress is derived only from that log (last write
//! wins, ties by log order), so restarting on the same log reproduces the
//! same state.
//!
//! Endpoints:
//!
//! * `GET /api/triplets?filter=unlabeled|all&page=&page_size=`
//! * `POST /api/labels` with `{triplet_id, label, curator}`
//! * `GET /api/progress`
//! * `GET /images/{id}`
//! * `/` serves the review UI's built assets when a UI directory is given.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::datamodel::{read_manifest, read_ndjson, validate_manifest, Consistency, Label, LabelRecord, Triplet};
use crate::error::{Error, Result};
use crate::ingest::index_images;
use crate::triplets::LabelCounts;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub high: usize,
    pub low: usize,
    pub unlabeled: usize,
    pub total: usize,
}

impl Progress {
    pub fn counts(&self) -> LabelCounts {
        LabelCounts {
            high: self.high,
            low: self.low,
            unlabeled: self.unlabeled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchFilter {
    Unlabeled,
    All,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletView {
    pub triplet_id: String,
    pub position: usize,
    pub style_ref: String,
    pub content_ref: String,
    pub target: String,
    pub style_ref_url: String,
    pub content_ref_url: String,
    pub target_url: String,
    pub label: Consistency,
}

struct Inner {
    log: File,
    latest: HashMap<String, (Label, i64)>,
    progress: Progress,
    last_timestamp: i64,
}

impl Inner {
    /// Applies one record with last-write-wins semantics.
    fn absorb(&mut self, record: &LabelRecord) {
        let previous = match self.latest.get(&record.triplet_id) {
            Some(&(_, ts)) if record.timestamp < ts => return,
            Some(&(label, _)) => Some(label),
            None => None,
        };
        match previous {
            Some(Label::High) => self.progress.high -= 1,
            Some(Label::Low) => self.progress.low -= 1,
            None => self.progress.unlabeled -= 1,
        }
        match record.label {
            Label::High => self.progress.high += 1,
            Label::Low => self.progress.low += 1,
        }
        self.latest
            .insert(record.triplet_id.clone(), (record.label, record.timestamp));
        self.last_timestamp = self.last_timestamp.max(record.timestamp);
    }
}

/// Manifest, image index and live label state behind the service.
pub struct ReviewState {
    manifest: Vec<Triplet>,
    index: HashMap<String, usize>,
    images: BTreeMap<String, PathBuf>,
    log_path: PathBuf,
    inner: Mutex<Inner>,
}

fn now_seconds() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0)
}

fn url_escape(id: &str) -> String {
    let mut out = String::with_capacity(id.len());
    for b in id.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' | b'/' => out.push(b as char),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

impl ReviewState {
    /// Builds the state and replays `log_path` (created if absent).
    pub fn new(mut manifest: Vec<Triplet>, images: BTreeMap<String, PathBuf>, log_path: &Path) -> Result<Self> {
        let report = validate_manifest(&manifest, None);
        if let Some(v) = report.violations.first() {
            return Err(Error::InvalidConfig(format!("manifest is invalid: {v}")));
        }
        manifest.sort_by(|a, b| a.triplet_id.cmp(&b.triplet_id));
        let index = manifest
            .iter()
            .enumerate()
            .map(|(i, t)| (t.triplet_id.clone(), i))
            .collect::<HashMap<_, _>>();

        let existing: Vec<LabelRecord> = if log_path.exists() {
            read_ndjson(log_path)?
        } else {
            Vec::new()
        };
        if let Some(parent) = log_path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(log_path)
            .map_err(|e| Error::io(log_path, e))?;

        let mut inner = Inner {
            log,
            latest: HashMap::new(),
            progress: Progress {
                unlabeled: manifest.len(),
                total: manifest.len(),
                ..Default::default()
            },
            last_timestamp: i64::MIN,
        };
        let mut unknown = 0usize;
        for record in &existing {
            if index.contains_key(&record.triplet_id) {
                inner.absorb(record);
            } else {
                unknown += 1;
            }
        }
        if unknown > 0 {
            log::warn!("{unknown} logged label(s) name triplets absent from the manifest");
        }
        Ok(Self {
            manifest,
            index,
            images,
            log_path: log_path.to_path_buf(),
            inner: Mutex::new(inner),
        })
    }

    /// Loads the manifest file and indexes images under `images_root`.
    pub fn open(manifest: &Path, images_root: &Path, log_path: &Path) -> Result<Self> {
        let triplets = read_manifest(manifest)?;
        let images = index_images(images_root)?
            .into_iter()
            .map(|(id, img)| (id, images_root.join(img.rel_path)))
            .collect();
        Self::new(triplets, images, log_path)
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn log_path(&self) -> &Path {
        &self.log_path
    }

    pub fn progress(&self) -> Progress {
        self.lock().progress
    }

    pub fn label_of(&self, triplet_id: &str) -> Option<Consistency> {
        self.index.get(triplet_id)?;
        Some(
            self.lock()
                .latest
                .get(triplet_id)
                .map(|(l, _)| (*l).into())
                .unwrap_or(Consistency::Unlabeled),
        )
    }

    /// Page `page` of the triplets matching `filter`, ordered by triplet id.
    /// Pages past the end are empty.
    pub fn next_batch(&self, filter: BatchFilter, page: usize, page_size: usize) -> Vec<TripletView> {
        let latest: HashMap<String, Label> = {
            let inner = self.lock();
            inner.latest.iter().map(|(k, (l, _))| (k.clone(), *l)).collect()
        };
        let label_of = |t: &Triplet| latest.get(&t.triplet_id).map(|l| (*l).into()).unwrap_or(Consistency::Unlabeled);
        self.manifest
            .iter()
            .filter(|t| filter == BatchFilter::All || !latest.contains_key(&t.triplet_id))
            .enumerate()
            .skip(page.saturating_mul(page_size))
            .take(page_size)
            .map(|(position, t)| TripletView {
                triplet_id: t.triplet_id.clone(),
                position,
                style_ref_url: format!("/images/{}", url_escape(&t.style_ref)),
                content_ref_url: format!("/images/{}", url_escape(&t.content_ref)),
                target_url: format!("/images/{}", url_escape(&t.target)),
                style_ref: t.style_ref.clone(),
                content_ref: t.content_ref.clone(),
                target: t.target.clone(),
                label: label_of(t),
            })
            .collect()
    }

    /// Appends a label stamped with the server clock.
    pub fn submit(&self, triplet_id: &str, label: Label, curator: &str) -> Result<Progress> {
        self.submit_at(triplet_id, label, curator, now_seconds())
    }

    /// Appends a label at `timestamp`, raised if needed so it never precedes
    /// an already logged record.
    pub fn submit_at(&self, triplet_id: &str, label: Label, curator: &str, timestamp: i64) -> Result<Progress> {
        if !self.index.contains_key(triplet_id) {
            return Err(Error::UnknownTriplet(triplet_id.to_string()));
        }
        let mut inner = self.lock();
        let record = LabelRecord {
            triplet_id: triplet_id.to_string(),
            label,
            curator: curator.to_string(),
            timestamp: timestamp.max(inner.last_timestamp),
        };
        let mut line = serde_json::to_string(&record)?;
        line.push('\n');
        inner
            .log
            .write_all(line.as_bytes())
            .and_then(|_| inner.log.flush())
            .map_err(|e| Error::io(&self.log_path, e))?;
        inner.absorb(&record);
        Ok(inner.progress)
    }

    pub fn image_path(&self, id: &str) -> Option<&Path> {
        self.images.get(id).map(PathBuf::as_path)
    }
}

#[derive(Debug, Deserialize)]
struct BatchQuery {
    filter: Option<String>,
    page: Option<usize>,
    page_size: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelRequest {
    triplet_id: String,
    label: String,
    curator: String,
}

#[derive(Debug, Serialize)]
struct LabelAck {
    triplet_id: String,
    label: Label,
    progress: Progress,
}

fn error_response(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "error": message.into() }))).into_response()
}

const DEFAULT_PAGE_SIZE: usize = 50;
const MAX_PAGE_SIZE: usize = 1000;

async fn list_triplets(State(state): State<Arc<ReviewState>>, Query(q): Query<BatchQuery>) -> Response {
    let filter = match q.filter.as_deref() {
        None | Some("unlabeled") => BatchFilter::Unlabeled,
        Some("all") => BatchFilter::All,
        Some(other) => return error_response(StatusCode::BAD_REQUEST, format!("unknown filter {other:?}")),
    };
    let page_size = q.page_size.unwrap_or(DEFAULT_PAGE_SIZE);
    if page_size == 0 || page_size > MAX_PAGE_SIZE {
        return error_response(
            StatusCode::BAD_REQUEST,
            format!("page_size must be in 1..={MAX_PAGE_SIZE}"),
        );
    }
    Json(state.next_batch(filter, q.page.unwrap_or(0), page_size)).into_response()
}

async fn post_label(State(state): State<Arc<ReviewState>>, body: Bytes) -> Response {
    let req: LabelRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, e.to_string()),
    };
    let label: Label = match req.label.parse() {
        Ok(l) => l,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, e),
    };
    if req.curator.trim().is_empty() {
        return error_response(StatusCode::BAD_REQUEST, "curator is required");
    }
    let worker_state = Arc::clone(&state);
    let id = req.triplet_id.clone();
    let outcome = tokio::task::spawn_blocking(move || worker_state.submit(&id, label, &req.curator)).await;
    match outcome {
        Ok(Ok(progress)) => Json(LabelAck {
            triplet_id: req.triplet_id,
            label,
            progress,
        })
        .into_response(),
        Ok(Err(Error::UnknownTriplet(id))) => error_response(StatusCode::NOT_FOUND, format!("unknown triplet {id}")),
        Ok(Err(e)) => error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn get_progress(State(state): State<Arc<ReviewState>>) -> Json<Progress> {
    Json(state.progress())
}

fn content_type(path: &Path) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        Some("gif") => "image/gif",
        Some("bmp") => "image/bmp",
        _ => "application/octet-stream",
    }
}

async fn get_image(State(state): State<Arc<ReviewState>>, UrlPath(id): UrlPath<String>) -> Response {
    let Some(path) = state.image_path(&id) else {
        return error_response(StatusCode::NOT_FOUND, format!("unknown image {id}"));
    };
    match tokio::fs::read(path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(path))], bytes).into_response(),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

const PLACEHOLDER_INDEX: &str = "<!doctype html>\n<title>Triplet review</title>\n\
<p>The review UI is not bundled with this server. Start it with <code>--ui &lt;dir&gt;</code> \
pointing at the built UI assets, or use the JSON API under <code>/api</code>.</p>\n";

pub fn router(state: Arc<ReviewState>, ui_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/triplets", get(list_triplets))
        .route("/api/labels", post(post_label))
        .route("/api/progress", get(get_progress))
        .route("/images/{*id}", get(get_image))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER_INDEX) })),
    }
}

#[derive(Debug, Clone)]
pub struct ReviewConfig {
    pub manifest: PathBuf,
    pub images_root: PathBuf,
    pub labels_log: PathBuf,
    pub host: IpAddr,
    pub port: u16,
    pub ui_dir: Option<PathBuf>,
}

impl ReviewConfig {
    pub fn new(manifest: impl Into<PathBuf>, images_root: impl Into<PathBuf>, labels_log: impl Into<PathBuf>, port: u16) -> Self {
        Self {
            manifest: manifest.into(),
            images_root: images_root.into(),
            labels_log: labels_log.into(),
            host: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port,
            ui_dir: None,
        }
    }
}

pub struct ReviewServer {
    listener: tokio::net::TcpListener,
    app: Router,
    state: Arc<ReviewState>,
}

impl ReviewServer {
    /// Loads state and binds the port; fails if either step fails.
    pub async fn bind(cfg: &ReviewConfig) -> Result<Self> {
        let state = Arc::new(ReviewState::open(&cfg.manifest, &cfg.images_root, &cfg.labels_log)?);
        let addr = SocketAddr::new(cfg.host, cfg.port);
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Error::io(format!("{addr}"), e))?;
        let app = router(Arc::clone(&state), cfg.ui_dir.as_deref());
        Ok(Self { listener, app, state })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        self.listener.local_addr().map_err(|e| Error::io("listener", e))
    }

    pub fn state(&self) -> Arc<ReviewState> {
        Arc::clone(&self.state)
    }

    pub async fn run(self) -> Result<()> {
        self.run_until(std::future::pending()).await
    }

    pub async fn run_until(self, shutdown: impl std::future::Future<Output = ()> + Send + 'static) -> Result<()> {
        let addr = self.local_addr()?;
        axum::serve(self.listener, self.app)
            .with_graceful_shutdown(shutdown)
            .await
            .map_err(|e| Error::io(format!("{addr}"), e))
    }
}

/// Binds and serves until the process is terminated.
pub async fn serve(cfg: &ReviewConfig) -> Result<()> {
    let server = ReviewServer::bind(cfg).await?;
    log::info!("review service listening on http://{}", server.local_addr()?);
    server.run().await
}
