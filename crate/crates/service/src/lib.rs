//! HTTP session layer over the segmentation core.
//!
//! A session holds one immutable volume, an optional reference mask and the
//! results of segmentation runs on it. Runs within a session are serialized;
//! everything else may proceed concurrently. Sessions idle for longer than
//! the configured timeout are dropped. See `docs/api.md` for the wire format.

pub mod error;
pub mod render;

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use glioseg_core::balloon::OutlineInit;
use glioseg_core::io::decode_bytes;
use glioseg_core::metrics::{dice, mask_volume, BinaryMask, Dice, MaskVolume};
use glioseg_core::segment::{self, Initialization, Method, MethodParams, Overrides, RunRecord};
use glioseg_core::{Axis, TriangleMesh, Volume, WorldPoint};

pub use error::{ApiError, ErrorBody};
use render::{encode_png, window, Overlay};

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(30 * 60);
pub const DEFAULT_MAX_UPLOAD_BYTES: usize = 1 << 30;

#[derive(Clone, Copy, Debug)]
pub struct Config {
    pub idle_timeout: Duration,
    pub max_upload_bytes: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            idle_timeout: DEFAULT_IDLE_TIMEOUT,
            max_upload_bytes: DEFAULT_MAX_UPLOAD_BYTES,
        }
    }
}

struct StoredResult {
    id: String,
    record: RunRecord,
    mask: BinaryMask,
    mesh: TriangleMesh,
}

pub struct Session {
    id: String,
    volume: Arc<Volume>,
    created_at: SystemTime,
    last_used: Mutex<Instant>,
    reference: RwLock<Option<Arc<BinaryMask>>>,
    results: RwLock<BTreeMap<u64, Arc<StoredResult>>>,
    next_result: AtomicU64,
    run_lock: tokio::sync::Mutex<()>,
}

impl Session {
    fn touch(&self) {
        *self.last_used.lock().unwrap() = Instant::now();
    }

    fn reference(&self) -> Option<Arc<BinaryMask>> {
        self.reference.read().unwrap().clone()
    }

    fn result(&self, rid: &str) -> Result<Arc<StoredResult>, ApiError> {
        let missing = || ApiError::not_found("result", format!("no result '{rid}' in this session"));
        let n: u64 = rid.strip_prefix('r').and_then(|n| n.parse().ok()).ok_or_else(missing)?;
        self.results.read().unwrap().get(&n).cloned().ok_or_else(missing)
    }
}

/// Shared state: the session store.
#[derive(Clone)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<Session>>>>,
    config: Config,
}

impl AppState {
    pub fn new(config: Config) -> Self {
        Self {
            sessions: Arc::default(),
            config,
        }
    }

    /// Drops sessions idle for longer than the timeout; returns how many.
    pub fn sweep(&self) -> usize {
        let timeout = self.config.idle_timeout;
        let mut map = self.sessions.write().unwrap();
        let before = map.len();
        map.retain(|_, s| s.last_used.lock().unwrap().elapsed() <= timeout);
        before - map.len()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    fn session(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        self.sweep();
        let s = self
            .sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session", format!("no session '{id}' (unknown or expired)")))?;
        s.touch();
        Ok(s)
    }
}

pub fn router(state: AppState) -> Router {
    let limit = state.config.max_upload_bytes;
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/slice", get(get_slice))
        .route("/sessions/{id}/reference", post(put_reference))
        .route("/sessions/{id}/segment", post(run_segmentation))
        .route("/sessions/{id}/results/{rid}", get(get_result))
        .route("/sessions/{id}/results/{rid}/overlay", get(get_overlay))
        .route("/sessions/{id}/results/{rid}/mesh", get(get_mesh))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Defaults {
    pub balloon: MethodParams,
    pub graph: MethodParams,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub intensity_range: [f32; 2],
    pub created_at_unix_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<MaskVolume>,
    pub results: Vec<ResultSummary>,
    pub defaults: Defaults,
}

/// Metrics of one run. `dsc` is computed against the session's reference
/// mask at the time of the request.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultSummary {
    pub result_id: String,
    #[serde(flatten)]
    pub record: RunRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dsc: Option<Dice>,
}

fn summary(session: &Session, r: &StoredResult) -> Result<ResultSummary, ApiError> {
    let dsc = match session.reference() {
        Some(m) => Some(dice(&r.mask, &m).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "metrics", e))?),
        None => None,
    };
    Ok(ResultSummary {
        result_id: r.id.clone(),
        record: r.record.clone(),
        dsc,
    })
}

fn info(s: &Session) -> Result<SessionInfo, ApiError> {
    let (lo, hi) = s.volume.intensity_range();
    let none = Overrides::new();
    let defaults = Defaults {
        balloon: segment::resolve_params(Method::Balloon, &s.volume, &none)?,
        graph: segment::resolve_params(Method::Graph, &s.volume, &none)?,
    };
    let results = s
        .results
        .read()
        .unwrap()
        .values()
        .map(|r| summary(s, r))
        .collect::<Result<_, _>>()?;
    Ok(SessionInfo {
        session_id: s.id.clone(),
        dims: s.volume.dims(),
        spacing_mm: s.volume.spacing(),
        intensity_range: [lo, hi],
        created_at_unix_ms: s.created_at.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64),
        reference: s.reference().as_deref().map(mask_volume),
        results,
        defaults,
    })
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e))
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let volume = blocking(move || decode_bytes(&body).and_then(|img| img.into_volume()))
        .await?
        .map_err(|e| ApiError::bad_request("upload", e))?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = Arc::new(Session {
        id: id.clone(),
        volume: Arc::new(volume),
        created_at: SystemTime::now(),
        last_used: Mutex::new(Instant::now()),
        reference: RwLock::new(None),
        results: RwLock::new(BTreeMap::new()),
        next_result: AtomicU64::new(1),
        run_lock: tokio::sync::Mutex::new(()),
    });
    let body = info(&session)?;
    state.sweep();
    state.sessions.write().unwrap().insert(id, session);
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionInfo>, ApiError> {
    let s = state.session(&id)?;
    Ok(Json(info(&s)?))
}

#[derive(Debug, Deserialize)]
pub struct SliceQuery {
    pub axis: Axis,
    pub index: usize,
    pub wc: Option<f64>,
    pub ww: Option<f64>,
}

fn query<T>(q: Result<Query<T>, QueryRejection>, stage: &str) -> Result<T, ApiError> {
    q.map(|Query(t)| t).map_err(|e| ApiError::bad_request(stage, e.body_text()))
}

async fn get_slice(
    State(state): State<AppState>,
    Path(id): Path<String>,
    q: Result<Query<SliceQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let s = state.session(&id)?;
    let q = query(q, "slice")?;
    let (w, h, px) = s.volume.slice(q.axis, q.index).ok_or_else(|| {
        ApiError::bad_request(
            "slice",
            format!("index {} out of bounds for axis {:?} with {} slices", q.index, q.axis, s.volume.dims()[q.axis.index()]),
        )
    })?;
    let (lo, hi) = s.volume.intensity_range();
    let wc = q.wc.unwrap_or((lo as f64 + hi as f64) / 2.0);
    let ww = q.ww.unwrap_or_else(|| ((hi - lo) as f64).max(1.0));
    if !(ww > 0.0 && ww.is_finite() && wc.is_finite()) {
        return Err(ApiError::bad_request("slice", "window width must be positive and finite"));
    }
    let gray: Vec<u8> = px.iter().map(|&v| window(v, wc, ww)).collect();
    let png = encode_png(w, h, &gray).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "slice", e))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

async fn put_reference(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<MaskVolume>, ApiError> {
    let s = state.session(&id)?;
    let mask = blocking(move || decode_bytes(&body).and_then(BinaryMask::from_raw))
        .await?
        .map_err(|e| ApiError::bad_request("reference", e))?;
    if mask.grid() != s.volume.grid() {
        return Err(ApiError::bad_request(
            "reference",
            format!(
                "mask grid {:?} / {:?} does not match volume grid {:?} / {:?}",
                mask.grid().dims,
                mask.grid().spacing,
                s.volume.dims(),
                s.volume.spacing()
            ),
        ));
    }
    let mv = mask_volume(&mask);
    *s.reference.write().unwrap() = Some(Arc::new(mask));
    Ok(Json(mv))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentRequest {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outline: Option<OutlineInit>,
    #[serde(default)]
    pub params: Overrides,
}

async fn run_segmentation(
    State(state): State<AppState>,
    Path(id): Path<String>,
    req: Result<Json<SegmentRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let s = state.session(&id)?;
    let Json(req) = req.map_err(|e| ApiError::bad_request("request", e.body_text()))?;
    let init = match (req.seed, req.outline) {
        (Some(p), None) => Initialization::Seed(WorldPoint::from(p)),
        (None, Some(o)) => Initialization::Outline(o),
        (Some(_), Some(_)) => {
            return Err(ApiError::bad_request("initialization", "give either a seed or an outline, not both"))
        }
        (None, None) => return Err(ApiError::bad_request("initialization", "a seed or an outline is required")),
    };

    let _guard = s.run_lock.lock().await;
    let volume = s.volume.clone();
    let (method, params) = (req.method, req.params);
    let result = blocking(move || segment::run(&volume, method, &init, &params)).await??;
    let n = s.next_result.fetch_add(1, Ordering::Relaxed);
    let stored = Arc::new(StoredResult {
        id: format!("r{n}"),
        record: result.record,
        mask: result.mask,
        mesh: result.mesh,
    });
    s.results.write().unwrap().insert(n, stored.clone());
    s.touch();
    Ok((StatusCode::CREATED, Json(summary(&s, &stored)?)).into_response())
}

async fn get_result(
    State(state): State<AppState>,
    Path((id, rid)): Path<(String, String)>,
) -> Result<Json<ResultSummary>, ApiError> {
    let s = state.session(&id)?;
    let r = s.result(&rid)?;
    Ok(Json(summary(&s, &r)?))
}

#[derive(Debug, Deserialize)]
pub struct OverlayQuery {
    pub axis: Axis,
    pub index: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OverlayResponse {
    pub result_id: String,
    pub axis: Axis,
    pub index: usize,
    #[serde(flatten)]
    pub overlay: Overlay,
}

async fn get_overlay(
    State(state): State<AppState>,
    Path((id, rid)): Path<(String, String)>,
    q: Result<Query<OverlayQuery>, QueryRejection>,
) -> Result<Json<OverlayResponse>, ApiError> {
    let s = state.session(&id)?;
    let r = s.result(&rid)?;
    let q = query(q, "overlay")?;
    let (w, h, px) = r.mask.slice(q.axis, q.index).ok_or_else(|| {
        ApiError::bad_request(
            "overlay",
            format!("index {} out of bounds for axis {:?} with {} slices", q.index, q.axis, r.mask.grid().dims[q.axis.index()]),
        )
    })?;
    Ok(Json(OverlayResponse {
        result_id: r.id.clone(),
        axis: q.axis,
        index: q.index,
        overlay: Overlay::encode(w, h, &px),
    }))
}

async fn get_mesh(
    State(state): State<AppState>,
    Path((id, rid)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let s = state.session(&id)?;
    let r = s.result(&rid)?;
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], r.mesh.to_off()).into_response())
}
