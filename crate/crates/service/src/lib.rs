//! HTTP front end: registration, first-password gate, round-by-round grid
//! delivery and the administrator's detection log. Every route lives under
//! `/v1`; bodies are JSON.

mod error;

use std::collections::HashMap;
use std::future::Future;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use axum::extract::{Query, State};
use axum::http::HeaderMap;
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use subtle::ConstantTimeEq;

use tpp_core::protocol::{ProtocolError, ROUNDS_PER_SESSION};
use tpp_core::{Authenticator, ColorKey, DetectionEvent, DetectionPolicy, SessionState, Verdict};

pub use error::ApiError;

/// Session lifetime from `/login/start`.
pub const SESSION_TTL: Duration = Duration::from_secs(120);

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub session_ttl: Duration,
    /// Bearer token for `/v1/admin/*`. Admin routes answer 403 when unset.
    pub admin_token: Option<String>,
    /// Fixes the server's random stream. For simulations only.
    pub seed: Option<u64>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig { session_ttl: SESSION_TTL, admin_token: None, seed: None }
    }
}

struct ApiSession {
    username: String,
    expires: Instant,
    inner: SessionState,
    finished: bool,
}

#[derive(Default)]
struct Sessions {
    by_token: HashMap<String, ApiSession>,
    /// Username to its single live token.
    active: HashMap<String, String>,
}

impl Sessions {
    fn remove(&mut self, token: &str) {
        if let Some(s) = self.by_token.remove(token) {
            if self.active.get(&s.username).is_some_and(|t| t == token) {
                self.active.remove(&s.username);
            }
        }
    }

    fn end_for_user(&mut self, username: &str) {
        if let Some(old) = self.active.remove(username) {
            self.by_token.remove(&old);
        }
    }

    fn sweep(&mut self, now: Instant) {
        let expired: Vec<String> = self
            .by_token
            .iter()
            .filter(|(_, s)| s.expires <= now)
            .map(|(t, _)| t.clone())
            .collect();
        for t in expired {
            self.remove(&t);
        }
    }
}

struct Shared {
    // Lock order: sessions, then auth, then rng.
    sessions: Mutex<Sessions>,
    auth: Mutex<Authenticator>,
    rng: Mutex<ChaCha20Rng>,
    config: ServiceConfig,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

impl AppState {
    pub fn new(auth: Authenticator, config: ServiceConfig) -> Self {
        let rng = match config.seed {
            Some(seed) => ChaCha20Rng::seed_from_u64(seed),
            None => ChaCha20Rng::from_os_rng(),
        };
        AppState(Arc::new(Shared {
            sessions: Mutex::new(Sessions::default()),
            auth: Mutex::new(auth),
            rng: Mutex::new(rng),
            config,
        }))
    }

    /// Runs `f` with exclusive access to the authenticator.
    pub fn with_authenticator<R>(&self, f: impl FnOnce(&mut Authenticator) -> R) -> R {
        f(&mut lock(&self.0.auth))
    }

    fn new_token(&self) -> String {
        let mut bytes = [0u8; 32];
        lock(&self.0.rng).fill_bytes(&mut bytes);
        hex::encode(bytes)
    }

    fn check_admin(&self, headers: &HeaderMap) -> Result<(), ApiError> {
        let expected = self.0.config.admin_token.as_deref().ok_or(ApiError::Forbidden)?;
        let presented = headers
            .get(axum::http::header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .ok_or(ApiError::Forbidden)?;
        if bool::from(presented.as_bytes().ct_eq(expected.as_bytes())) {
            Ok(())
        } else {
            Err(ApiError::Forbidden)
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/register", post(register))
        .route("/v1/login/start", post(login_start))
        .route("/v1/login/round", get(get_round).post(post_round))
        .route("/v1/password/change", post(change_password))
        .route("/v1/admin/detections", get(detections))
        .route("/v1/admin/policy", post(set_policy))
        .route("/v1/admin/unblock", post(unblock))
        .with_state(state)
}

/// Serves `app` on `listener` until `shutdown` resolves.
pub async fn serve<F>(listener: tokio::net::TcpListener, app: Router, shutdown: F) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Ack {
    pub ok: bool,
}

const ACK: Ack = Ack { ok: true };

#[derive(Debug, Deserialize)]
pub struct RegisterRequest {
    pub username: String,
    pub p1: String,
    pub p2: String,
}

async fn register(
    State(state): State<AppState>,
    Json(req): Json<RegisterRequest>,
) -> Result<Json<Ack>, ApiError> {
    let mut rng = ChaCha20Rng::from_seed(seed_from(&state));
    state.with_authenticator(|auth| auth.register(&req.username, &req.p1, &req.p2, &mut rng))?;
    Ok(Json(ACK))
}

fn seed_from(state: &AppState) -> [u8; 32] {
    let mut seed = [0u8; 32];
    lock(&state.0.rng).fill_bytes(&mut seed);
    seed
}

#[derive(Debug, Deserialize)]
pub struct StartRequest {
    pub username: String,
    pub p1: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StartResponse {
    pub token: String,
    pub challenge_index: u8,
}

async fn login_start(
    State(state): State<AppState>,
    Json(req): Json<StartRequest>,
) -> Result<Json<StartResponse>, ApiError> {
    let mut rng = ChaCha20Rng::from_seed(seed_from(&state));
    let session = state.with_authenticator(|auth| auth.start_session(&req.username, &req.p1, &mut rng))?;
    let token = state.new_token();
    let challenge_index = session.challenge().get();
    let now = Instant::now();
    let mut sessions = lock(&state.0.sessions);
    sessions.sweep(now);
    sessions.end_for_user(&req.username);
    sessions.active.insert(req.username.clone(), token.clone());
    sessions.by_token.insert(
        token.clone(),
        ApiSession {
            username: req.username,
            expires: now + state.0.config.session_ttl,
            inner: session,
            finished: false,
        },
    );
    Ok(Json(StartResponse { token, challenge_index }))
}

#[derive(Debug, Deserialize)]
pub struct TokenQuery {
    pub token: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RoundResponse {
    pub round_no: usize,
    pub coloring: Vec<u8>,
}

/// Looks up a live session, dropping it if expired.
fn live<'a>(sessions: &'a mut Sessions, token: &str) -> Result<&'a mut ApiSession, ApiError> {
    let expired = match sessions.by_token.get(token) {
        None => return Err(ApiError::UnknownSession),
        Some(s) => s.expires <= Instant::now(),
    };
    if expired {
        sessions.remove(token);
        return Err(ApiError::Expired);
    }
    let session = sessions.by_token.get_mut(token).expect("checked above");
    if session.finished {
        return Err(ApiError::Complete);
    }
    Ok(session)
}

async fn get_round(
    State(state): State<AppState>,
    Query(q): Query<TokenQuery>,
) -> Result<Json<RoundResponse>, ApiError> {
    let mut sessions = lock(&state.0.sessions);
    let session = live(&mut sessions, &q.token)?;
    Ok(Json(RoundResponse {
        round_no: session.inner.round_no(),
        coloring: session.inner.current_coloring().ordinals().to_vec(),
    }))
}

#[derive(Debug, Deserialize)]
pub struct RoundRequest {
    pub token: String,
    pub key: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoundStatus {
    Pending,
    Success,
    Failure,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StatusResponse {
    pub status: RoundStatus,
}

async fn post_round(
    State(state): State<AppState>,
    Json(req): Json<RoundRequest>,
) -> Result<Json<StatusResponse>, ApiError> {
    let key = u8::try_from(req.key)
        .ok()
        .and_then(|k| ColorKey::from_ordinal(k).ok())
        .ok_or(ApiError::BadKey)?;
    let mut sessions = lock(&state.0.sessions);
    let session = live(&mut sessions, &req.token)?;
    let verdict = session.inner.submit_response(key)?;
    if !verdict.is_final() {
        debug_assert!(session.inner.responses().len() < ROUNDS_PER_SESSION);
        return Ok(Json(StatusResponse { status: RoundStatus::Pending }));
    }
    session.finished = true;
    let recorded = state.with_authenticator(|auth| auth.finish(&session.inner))?;
    // A detected decoy looks like any other failure from the outside.
    let status = match recorded {
        Verdict::Success => RoundStatus::Success,
        _ => RoundStatus::Failure,
    };
    Ok(Json(StatusResponse { status }))
}

#[derive(Debug, Deserialize)]
pub struct ChangeRequest {
    pub username: String,
    pub p1: String,
    pub new_p2: String,
    #[serde(default)]
    pub new_p1: Option<String>,
}

async fn change_password(
    State(state): State<AppState>,
    Json(req): Json<ChangeRequest>,
) -> Result<Json<Ack>, ApiError> {
    let mut rng = ChaCha20Rng::from_seed(seed_from(&state));
    let mut sessions = lock(&state.0.sessions);
    state.with_authenticator(|auth| {
        auth.change_password(&req.username, &req.p1, &req.new_p2, req.new_p1.as_deref(), &mut rng)
    })?;
    sessions.end_for_user(&req.username);
    Ok(Json(ACK))
}

async fn detections(
    State(state): State<AppState>,
    headers: HeaderMap,
) -> Result<Json<Vec<DetectionEvent>>, ApiError> {
    state.check_admin(&headers)?;
    Ok(Json(state.with_authenticator(|auth| auth.detections().to_vec())))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PolicyRequest {
    pub mode: DetectionPolicy,
}

async fn set_policy(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(req): Json<PolicyRequest>,
) -> Result<Json<PolicyRequest>, ApiError> {
    state.check_admin(&headers)?;
    state.with_authenticator(|auth| auth.set_policy(req.mode));
    Ok(Json(req))
}

#[derive(Debug, Deserialize)]
pub struct UnblockRequest {
    pub username: String,
}

async fn unblock(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(req): Json<UnblockRequest>,
) -> Result<Json<Ack>, ApiError> {
    state.check_admin(&headers)?;
    state.with_authenticator(|auth| auth.unblock(&req.username))?;
    Ok(Json(ACK))
}

impl From<ProtocolError> for ApiError {
    fn from(e: ProtocolError) -> Self {
        error::from_protocol(e)
    }
}
