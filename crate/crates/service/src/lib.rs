//! HTTP service for playing CIRL games as the human against a solved robot
//! policy.
//!
//! Routes:
//! - `POST /games`, `GET /games`, `GET /games/{id}`
//! - `POST /policies`, `GET /policies`
//! - `POST /sessions`, `GET /sessions/{id}`, `POST /sessions/{id}/actions`,
//!   `GET /sessions/{id}/result`
//!
//! The robot commits to its move before the human acts; the two moves are
//! then applied together.

pub mod error;
pub mod session;
pub mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use cirl_core::domains::GameSpec;
use cirl_core::game::GameFingerprint;
use cirl_core::human::sample_index;
use cirl_core::policy_file::PolicyFile;
use cirl_core::CirlGame;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use error::{ApiError, ApiResult, ErrorBody};
pub use session::{SessionRecord, SessionView, Status, TurnRecord, SESSION_SCHEMA_VERSION};
use session::Runtime;
use store::{Kind, Store};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameSummary {
    pub id: String,
    pub name: String,
    pub theta_labels: Vec<String>,
    pub human_actions: Vec<String>,
    pub robot_actions: Vec<String>,
    pub horizon: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub id: String,
    pub solver: String,
    pub game: GameFingerprint,
    pub value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaChoice {
    Index(usize),
    Label(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub game_id: String,
    pub policy_id: String,
    /// Drawn from the prior with `seed` when absent.
    #[serde(default)]
    pub theta: Option<ThetaChoice>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanMove {
    pub human_action: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub id: String,
    pub status: Status,
    pub success: bool,
    pub discounted_return: f64,
    pub theta: usize,
    pub transcript: Vec<TurnRecord>,
}

type Live = Arc<tokio::sync::Mutex<Runtime>>;

struct Inner {
    store: Store,
    games: Mutex<HashMap<String, CirlGame>>,
    policies: Mutex<HashMap<String, Arc<PolicyFile>>>,
    sessions: Mutex<HashMap<String, Live>>,
    /// Serializes id allocation.
    create: Mutex<()>,
}

/// Shared service state.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn open(data_dir: impl AsRef<Path>) -> std::io::Result<Self> {
        Ok(AppState(Arc::new(Inner {
            store: Store::open(data_dir)?,
            games: Mutex::default(),
            policies: Mutex::default(),
            sessions: Mutex::default(),
            create: Mutex::default(),
        })))
    }

    fn game(&self, id: &str) -> ApiResult<CirlGame> {
        if let Some(g) = self.0.games.lock().unwrap().get(id) {
            return Ok(g.clone());
        }
        let spec = GameSpec::from_json(&self.0.store.get_raw(Kind::Game, id)?)?;
        let game = spec.build()?;
        self.0.games.lock().unwrap().insert(id.to_owned(), game.clone());
        Ok(game)
    }

    fn policy(&self, id: &str) -> ApiResult<Arc<PolicyFile>> {
        if let Some(p) = self.0.policies.lock().unwrap().get(id) {
            return Ok(p.clone());
        }
        let policy = Arc::new(PolicyFile::from_json(&self.0.store.get_raw(Kind::Policy, id)?)?);
        self.0.policies.lock().unwrap().insert(id.to_owned(), policy.clone());
        Ok(policy)
    }

    /// The live session, rebuilt from disk if this process has not seen it.
    async fn session(&self, id: &str) -> ApiResult<Live> {
        if let Some(s) = self.0.sessions.lock().unwrap().get(id) {
            return Ok(s.clone());
        }
        let record: SessionRecord = self.0.store.get(Kind::Session, id)?;
        let game = self.game(&record.game_id)?;
        let policy = self.policy(&record.policy_id)?;
        let rt = blocking(move || Runtime::start(game, policy, record)).await?;
        let live = Arc::new(tokio::sync::Mutex::new(rt));
        Ok(self.0.sessions.lock().unwrap().entry(id.to_owned()).or_insert(live).clone())
    }
}

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> ApiResult<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Internal(e.to_string()))?
}

fn summary(id: &str, g: &CirlGame) -> GameSummary {
    GameSummary {
        id: id.to_owned(),
        name: g.name().to_owned(),
        theta_labels: g.theta_labels().to_vec(),
        human_actions: g.human_action_labels().to_vec(),
        robot_actions: g.robot_action_labels().to_vec(),
        horizon: g.horizon(),
    }
}

async fn post_game(State(app): State<AppState>, body: String) -> ApiResult<(StatusCode, Json<GameSummary>)> {
    let spec = GameSpec::from_json(&body)?;
    let game = spec.build()?;
    let id = {
        let _guard = app.0.create.lock().unwrap();
        let id = app.0.store.next_id(Kind::Game)?;
        app.0.store.put(Kind::Game, &id, &spec)?;
        id
    };
    let out = summary(&id, &game);
    app.0.games.lock().unwrap().insert(id, game);
    Ok((StatusCode::CREATED, Json(out)))
}

async fn list_games(State(app): State<AppState>) -> ApiResult<Json<Vec<GameSummary>>> {
    let ids = app.0.store.ids(Kind::Game)?;
    ids.iter().map(|id| Ok(summary(id, &app.game(id)?))).collect::<ApiResult<Vec<_>>>().map(Json)
}

async fn get_game(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<GameSummary>> {
    Ok(Json(summary(&id, &app.game(&id)?)))
}

fn policy_summary(id: &str, p: &PolicyFile) -> PolicySummary {
    PolicySummary { id: id.to_owned(), solver: p.solver.name().to_owned(), game: p.game.clone(), value: p.value }
}

async fn post_policy(State(app): State<AppState>, body: String) -> ApiResult<(StatusCode, Json<PolicySummary>)> {
    let policy = PolicyFile::from_json(&body)?;
    let id = {
        let _guard = app.0.create.lock().unwrap();
        let id = app.0.store.next_id(Kind::Policy)?;
        app.0.store.put(Kind::Policy, &id, &policy)?;
        id
    };
    let out = policy_summary(&id, &policy);
    app.0.policies.lock().unwrap().insert(id, Arc::new(policy));
    Ok((StatusCode::CREATED, Json(out)))
}

async fn list_policies(State(app): State<AppState>) -> ApiResult<Json<Vec<PolicySummary>>> {
    let ids = app.0.store.ids(Kind::Policy)?;
    ids.iter().map(|id| Ok(policy_summary(id, &*app.policy(id)?))).collect::<ApiResult<Vec<_>>>().map(Json)
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &str) -> ApiResult<T> {
    serde_json::from_str(body).map_err(|e| ApiError::Validation(format!("bad request body: {e}")))
}

async fn post_session(State(app): State<AppState>, body: String) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let req: CreateSession = parse_json(&body)?;
    let game = app.game(&req.game_id)?;
    let policy = app.policy(&req.policy_id)?;
    policy.check_game(&game)?;
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let theta = match &req.theta {
        Some(ThetaChoice::Index(i)) if *i < game.n_theta() => *i,
        Some(ThetaChoice::Index(i)) => return Err(ApiError::Validation(format!("theta {i} out of range"))),
        Some(ThetaChoice::Label(l)) => game
            .theta_labels()
            .iter()
            .position(|t| t == l)
            .ok_or_else(|| ApiError::Validation(format!("unknown reward parameter `{l}`")))?,
        None => sample_index(&game.initial_belief().theta_marginal(&game), &mut rng),
    };
    let n_w = game.n_world();
    let prior = &game.initial()[theta * n_w..(theta + 1) * n_w];
    let mass: f64 = prior.iter().sum();
    if mass <= 0.0 {
        return Err(ApiError::Validation(format!("theta {theta} has no prior mass")));
    }
    let initial_world = sample_index(&prior.iter().map(|p| p / mass).collect::<Vec<_>>(), &mut rng);
    let id = {
        let _guard = app.0.create.lock().unwrap();
        let id = app.0.store.next_id(Kind::Session)?;
        let record = SessionRecord {
            schema_version: SESSION_SCHEMA_VERSION,
            id: id.clone(),
            game_id: req.game_id.clone(),
            policy_id: req.policy_id.clone(),
            theta,
            seed: req.seed,
            initial_world,
            transcript: Vec::new(),
        };
        app.0.store.put(Kind::Session, &id, &record)?;
        id
    };
    let live = app.session(&id).await?;
    let view = live.lock().await.view();
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<SessionView>> {
    let live = app.session(&id).await?;
    let view = live.lock().await.view();
    Ok(Json(view))
}

async fn post_action(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: String,
) -> ApiResult<Json<SessionView>> {
    let mv: HumanMove = parse_json(&body)?;
    let live = app.session(&id).await?;
    let guard = live
        .clone()
        .try_lock_owned()
        .map_err(|_| ApiError::Conflict(format!("session {id} is processing another action")))?;
    let store = app.0.store.clone();
    let view = blocking(move || {
        let mut rt = guard;
        if rt.status() != Status::Active {
            return Err(ApiError::Conflict(format!("session {id} has finished")));
        }
        let before = rt.record.clone();
        if let Err(e) = rt.apply(mv.human_action, None) {
            // Leave the live state as it was on disk.
            *rt = Runtime::start_like(&rt, before)?;
            return Err(e);
        }
        store.put(Kind::Session, &id, &rt.record)?;
        Ok(rt.view())
    })
    .await?;
    Ok(Json(view))
}

async fn get_result(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<SessionResult>> {
    let live = app.session(&id).await?;
    let rt = live.lock().await;
    let view = rt.view();
    if view.status == Status::Active {
        return Err(ApiError::Conflict(format!("session {id} is still active")));
    }
    Ok(Json(SessionResult {
        id: view.id,
        status: view.status,
        success: view.status == Status::Success,
        discounted_return: view.discounted_return,
        theta: view.theta,
        transcript: view.transcript,
    }))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/games", post(post_game).get(list_games))
        .route("/games/{id}", get(get_game))
        .route("/policies", post(post_policy).get(list_policies))
        .route("/sessions", post(post_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/actions", post(post_action))
        .route("/sessions/{id}/result", get(get_result))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, data_dir: impl AsRef<Path>) -> std::io::Result<()> {
    let app = router(AppState::open(data_dir)?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, app).await
}
