//! HTTP API over the what-if pipeline.
//!
//! | method | path                  | body                         |
//! |--------|-----------------------|------------------------------|
//! | POST   | `/scenes`             | `{seed}` or `{scene}`        |
//! | GET    | `/scenes/{id}`        |                              |
//! | DELETE | `/scenes/{id}`        |                              |
//! | POST   | `/scenes/{id}/whatif` | `{text, backend?}`           |
//! | GET    | `/healthz`            |                              |
//!
//! Bodies use the same JSON schemas as the files written by the CLI.
//! Trajectories are sent at 30 Hz, every tenth sample of the 300 Hz run.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use whatif_core::catalog::ObjectClass;
use whatif_core::codec;
use whatif_core::datagen;
use whatif_core::describer::Event;
use whatif_core::parser::Backend;
use whatif_core::physics::{ContactEvent, SimulationResult, Simulator};
use whatif_core::pipeline::{answer_whatif, Models, StageError, WhatIfAnswer};
use whatif_core::scene::{validate_scene, Scene};
use whatif_core::trajectory::Trajectory;
use whatif_core::Error;

/// 300 Hz to 30 Hz.
pub const TRANSPORT_STRIDE: usize = 10;

struct Entry {
    scene: Arc<Scene>,
    last: Option<Arc<SimulationResult>>,
}

#[derive(Default)]
struct SessionStore {
    scenes: Mutex<HashMap<String, Entry>>,
    next: AtomicU64,
    dir: Option<PathBuf>,
}

impl SessionStore {
    fn insert(&self, scene: Scene) -> Result<String, ApiError> {
        let id = format!("s{}", self.next.fetch_add(1, Ordering::Relaxed));
        if let Some(dir) = &self.dir {
            codec::write_file(dir.join(format!("{id}.json")), &scene)
                .map_err(ApiError::internal)?;
        }
        self.lock().insert(
            id.clone(),
            Entry {
                scene: Arc::new(scene),
                last: None,
            },
        );
        Ok(id)
    }

    fn get(&self, id: &str) -> Option<Arc<Scene>> {
        self.lock().get(id).map(|e| e.scene.clone())
    }

    fn remove(&self, id: &str) -> bool {
        if let Some(dir) = &self.dir {
            let _ = std::fs::remove_file(dir.join(format!("{id}.json")));
        }
        self.lock().remove(id).is_some()
    }

    fn record(&self, id: &str, result: SimulationResult) {
        if let Some(e) = self.lock().get_mut(id) {
            e.last = Some(Arc::new(result));
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, HashMap<String, Entry>> {
        self.scenes.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Loads `s<N>.json` files from `dir` and keeps writing new scenes
    /// there.
    fn open(dir: PathBuf) -> whatif_core::Result<SessionStore> {
        std::fs::create_dir_all(&dir)
            .map_err(|e| Error::InvalidValue(format!("{}: {e}", dir.display())))?;
        let mut scenes = HashMap::new();
        let mut next = 0;
        let listing = std::fs::read_dir(&dir)
            .map_err(|e| Error::InvalidValue(format!("{}: {e}", dir.display())))?;
        for item in listing.flatten() {
            let path = item.path();
            let Some(n) = path
                .file_stem()
                .and_then(|s| s.to_str())
                .and_then(|s| s.strip_prefix('s'))
                .and_then(|s| s.parse::<u64>().ok())
            else {
                continue;
            };
            let scene: Scene = codec::read_file(&path)?;
            next = next.max(n + 1);
            scenes.insert(
                format!("s{n}"),
                Entry {
                    scene: Arc::new(scene),
                    last: None,
                },
            );
        }
        Ok(SessionStore {
            scenes: Mutex::new(scenes),
            next: AtomicU64::new(next),
            dir: Some(dir),
        })
    }
}

pub struct AppState {
    store: SessionStore,
    models: Arc<Models>,
    sim: Simulator,
}

impl AppState {
    pub fn new(models: Models) -> Self {
        AppState {
            store: SessionStore::default(),
            models: Arc::new(models),
            sim: Simulator::default(),
        }
    }

    /// State whose scenes are also kept as files in `dir`.
    pub fn persistent(models: Models, dir: PathBuf) -> whatif_core::Result<Self> {
        Ok(AppState {
            store: SessionStore::open(dir)?,
            models: Arc::new(models),
            sim: Simulator::default(),
        })
    }

    /// The last simulation run for scene `id`, kept at full rate.
    pub fn last_simulation(&self, id: &str) -> Option<Arc<SimulationResult>> {
        self.store.lock().get(id).and_then(|e| e.last.clone())
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/scenes", post(create_scene))
        .route("/scenes/{id}", get(get_scene).delete(delete_scene))
        .route("/scenes/{id}/whatif", post(whatif))
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    Schema { path: String, message: String },
    Stage(StageError),
    Internal(String),
}

impl ApiError {
    fn internal(e: impl std::fmt::Display) -> Self {
        ApiError::Internal(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::NotFound(id) => (
                StatusCode::NOT_FOUND,
                json!({ "message": format!("no scene `{id}`") }),
            ),
            ApiError::Schema { path, message } => (
                StatusCode::BAD_REQUEST,
                json!({ "path": path, "message": message }),
            ),
            ApiError::Stage(e) if e.error.is_data_error() => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({ "stage": e.stage, "message": e.error.to_string() }),
            ),
            ApiError::Stage(e) => (
                StatusCode::INTERNAL_SERVER_ERROR,
                json!({ "stage": e.stage, "message": e.error.to_string() }),
            ),
            ApiError::Internal(message) => (
                StatusCode::INTERNAL_SERVER_ERROR,
                json!({ "message": message }),
            ),
        };
        (status, Json(body)).into_response()
    }
}

fn decode<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let text = std::str::from_utf8(body).map_err(|e| ApiError::Schema {
        path: ".".into(),
        message: e.to_string(),
    })?;
    codec::decode(text).map_err(|e| match e {
        Error::Schema { path, message } => ApiError::Schema { path, message },
        other => ApiError::Schema {
            path: ".".into(),
            message: other.to_string(),
        },
    })
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateScene {
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    scene: Option<Scene>,
}

#[derive(Serialize)]
struct SceneBody<'a> {
    id: &'a str,
    scene: &'a Scene,
}

async fn create_scene(State(st): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateScene = if body.iter().all(u8::is_ascii_whitespace) {
        CreateScene {
            seed: None,
            scene: None,
        }
    } else {
        decode(&body)?
    };
    let scene = match (req.scene, req.seed) {
        (Some(_), Some(_)) => {
            return Err(ApiError::Schema {
                path: ".".into(),
                message: "give either `seed` or `scene`, not both".into(),
            })
        }
        (Some(scene), None) => {
            if let Some(v) = validate_scene(&scene).first() {
                return Err(ApiError::Schema {
                    path: ".scene".into(),
                    message: v.to_string(),
                });
            }
            scene
        }
        (None, seed) => {
            let seed = seed.unwrap_or(0);
            let sim = st.sim.clone();
            tokio::task::spawn_blocking(move || datagen::sample_scene_with(&sim, seed))
                .await
                .map_err(ApiError::internal)?
                .map_err(ApiError::internal)?
        }
    };
    let id = st.store.insert(scene.clone())?;
    let body = codec::encode(&SceneBody {
        id: &id,
        scene: &scene,
    });
    Ok((StatusCode::CREATED, json_text(body)).into_response())
}

fn json_text(body: String) -> impl IntoResponse {
    (
        [(axum::http::header::CONTENT_TYPE, "application/json")],
        body,
    )
}

async fn get_scene(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let scene = st
        .store
        .get(&id)
        .ok_or_else(|| ApiError::NotFound(id.clone()))?;
    Ok(json_text(codec::encode(&SceneBody {
        id: &id,
        scene: &scene,
    }))
    .into_response())
}

async fn delete_scene(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<StatusCode, ApiError> {
    if st.store.remove(&id) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::NotFound(id))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WhatIfRequest {
    text: String,
    #[serde(default)]
    backend: Option<Backend>,
}

#[derive(Serialize)]
struct DescriptionBody<'a> {
    subject: ObjectClass,
    text: &'a str,
}

#[derive(Serialize)]
pub struct WhatIfBody<'a> {
    action: &'a whatif_core::action::Action,
    backend: Backend,
    descriptions: Vec<DescriptionBody<'a>>,
    events: Vec<&'a Event>,
    contacts: &'a [ContactEvent],
    trajectories_30hz: Vec<Trajectory>,
}

/// Wire form of an answer.
pub fn answer_body(answer: &WhatIfAnswer) -> String {
    let body = WhatIfBody {
        action: answer.action(),
        backend: answer.parse.backend,
        descriptions: answer
            .descriptions
            .values()
            .map(|d| DescriptionBody {
                subject: d.subject,
                text: &d.text,
            })
            .collect(),
        events: answer.events(),
        contacts: answer.contacts(),
        trajectories_30hz: answer
            .simulation
            .trajectories
            .values()
            .filter(|t| !t.removed)
            .map(|t| t.downsample(TRANSPORT_STRIDE))
            .collect(),
    };
    codec::encode(&body)
}

async fn whatif(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: WhatIfRequest = decode(&body)?;
    let scene = st
        .store
        .get(&id)
        .ok_or_else(|| ApiError::NotFound(id.clone()))?;
    let backend = req.backend.unwrap_or(Backend::Rules);
    let worker = st.clone();
    let answer = tokio::task::spawn_blocking(move || {
        answer_whatif(&worker.sim, &scene, &req.text, &worker.models, backend)
    })
    .await
    .map_err(ApiError::internal)?
    .map_err(ApiError::Stage)?;
    let body = answer_body(&answer);
    st.store.record(&id, answer.simulation);
    Ok(json_text(body).into_response())
}
