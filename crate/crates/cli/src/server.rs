//! HTTP API. Request bodies carry the scenario document inline; responses
//! are the same JSON reports the command line writes.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use t20_core::batting_opt::BattingSearchConfig;
use t20_core::bowling_opt::SaConfig;
use t20_core::ingest::Role;
use t20_core::profiles::ProfileStore;
use t20_core::report::{self, ReportError};
use t20_core::scenario::{scenario_from_value, LoadedScenario, ScenarioError};
use uuid::Uuid;

use crate::jobs::{JobError, Jobs};

#[derive(Clone)]
pub struct AppState {
    pub store: Option<Arc<ProfileStore>>,
    pub jobs: Jobs,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/evaluate/batting", post(evaluate_batting))
        .route("/evaluate/bowling", post(evaluate_bowling))
        .route("/optimize/batting", post(optimize_batting))
        .route("/optimize/bowling", post(optimize_bowling))
        .route("/audit", post(audit))
        .route("/jobs/{id}", get(job))
        .route("/profiles/{player}", get(profile))
        .with_state(state)
}

/// Error body: `{"error": ..., "field": ...}` or `{"error": ..., "constraint": ...}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn bad_request(field: Option<&str>, message: impl Into<String>) -> Self {
        ApiError { status: StatusCode::BAD_REQUEST, body: json!({ "error": message.into(), "field": field }) }
    }

    fn infeasible(message: String) -> Self {
        // the first token before ':' names the constraint, e.g. "quota" or "no-consecutive"
        let constraint = message.split(':').next().unwrap_or("").trim().to_string();
        ApiError { status: StatusCode::UNPROCESSABLE_ENTITY, body: json!({ "error": message, "constraint": constraint }) }
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError { status: StatusCode::NOT_FOUND, body: json!({ "error": message.into() }) }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn infeasible_message(e: &ReportError) -> String {
    let s = e.to_string();
    // strip wrapper prefixes so the message starts with the constraint name
    for prefix in ["infeasible scenario: ", "infeasible bowling plan: ", "no feasible plan: "] {
        if let Some(rest) = s.strip_prefix(prefix) {
            return rest.to_string();
        }
    }
    s
}

impl From<ReportError> for ApiError {
    fn from(e: ReportError) -> Self {
        if e.is_infeasible() {
            return ApiError::infeasible(infeasible_message(&e));
        }
        match &e {
            ReportError::Scenario(se) => {
                let field = se.field_path().map(|f| format!("scenario.{f}"));
                ApiError::bad_request(field.as_deref(), se.to_string())
            }
            _ => ApiError::bad_request(None, e.to_string()),
        }
    }
}

impl From<ApiError> for JobError {
    fn from(e: ApiError) -> Self {
        let message = e.body.get("error").and_then(Value::as_str).unwrap_or_default().to_string();
        JobError { status: e.status.as_u16(), message }
    }
}

/// Decodes a body with the JSON path of any mismatch.
fn decode<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::bad_request(Some(&path), e.into_inner().to_string())
    })
}

fn scenario(state: &AppState, value: Value) -> Result<LoadedScenario, ApiError> {
    scenario_from_value(value, state.store.as_deref()).map_err(|e| match e {
        ScenarioError::Infeasible(m) => ApiError::infeasible(m),
        other => {
            let field = other.field_path().map(|f| format!("scenario.{f}"));
            ApiError::bad_request(field.as_deref(), other.to_string())
        }
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateRequest {
    scenario: Value,
    /// Batting order or bowling plan as player ids.
    #[serde(default, alias = "order")]
    plan: Option<Vec<String>>,
    #[serde(default = "default_sims")]
    sims: u64,
    #[serde(default)]
    seed: u64,
}

fn default_sims() -> u64 {
    50_000
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizeRequest<C> {
    scenario: Value,
    #[serde(default)]
    config: Option<C>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AuditRequest {
    scenario: Value,
    /// Search configuration for the scenario's kind.
    #[serde(default)]
    config: Option<Value>,
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    tokio::task::spawn_blocking(f).await.expect("evaluation task panicked")
}

async fn evaluate_batting(State(st): State<AppState>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let req: EvaluateRequest = decode(&body)?;
    let s = scenario(&st, req.scenario)?;
    let r = blocking(move || report::evaluate_batting(&s, req.plan.as_deref(), req.sims, req.seed)).await?;
    Ok(Json(serde_json::to_value(r).expect("report serializes")))
}

async fn evaluate_bowling(State(st): State<AppState>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let req: EvaluateRequest = decode(&body)?;
    let s = scenario(&st, req.scenario)?;
    let r = blocking(move || report::evaluate_bowling(&s, req.plan.as_deref(), req.sims, req.seed)).await?;
    Ok(Json(serde_json::to_value(r).expect("report serializes")))
}

fn accepted(id: Uuid) -> (StatusCode, Json<Value>) {
    (StatusCode::ACCEPTED, Json(json!({ "job_id": id, "poll": format!("/jobs/{id}") })))
}

fn kind_check(s: &LoadedScenario, batting: bool) -> Result<(), ApiError> {
    if s.batting().is_some() != batting {
        let want = if batting { "batting" } else { "bowling" };
        return Err(ApiError::bad_request(Some("scenario.kind"), format!("expected a {want} scenario")));
    }
    Ok(())
}

async fn optimize_batting(State(st): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: OptimizeRequest<BattingSearchConfig> = decode(&body)?;
    let s = scenario(&st, req.scenario)?;
    kind_check(&s, true)?;
    let cfg = req.config.unwrap_or_default();
    cfg.validate().map_err(|e| ApiError::bad_request(Some("config"), e.to_string()))?;
    let id = st.jobs.submit("optimize_batting", 1, move |_| {
        let r = report::optimize_batting(&s, &cfg).map_err(|e| JobError::from(ApiError::from(e)))?;
        Ok(serde_json::to_value(r).expect("report serializes"))
    });
    Ok(accepted(id))
}

async fn optimize_bowling(State(st): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: OptimizeRequest<SaConfig> = decode(&body)?;
    let s = scenario(&st, req.scenario)?;
    kind_check(&s, false)?;
    let cfg = req.config.unwrap_or_default();
    cfg.validate().map_err(|e| ApiError::bad_request(Some("config"), e.to_string()))?;
    // surface infeasibility now rather than as a failed job
    t20_core::bowling_opt::greedy_initial_plan(&s.bowling().expect("kind checked").scenario)
        .map_err(|e| ApiError::from(ReportError::from(e)))?;
    let every = (cfg.steps / 100).max(1);
    let id = st.jobs.submit("optimize_bowling", cfg.steps, move |rep| {
        let r = report::optimize_bowling(&s, &cfg, every, |p| rep.progress(p.step, p.best_fast))
            .map_err(|e| JobError::from(ApiError::from(e)))?;
        Ok(serde_json::to_value(r).expect("report serializes"))
    });
    Ok(accepted(id))
}

async fn audit(State(st): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: AuditRequest = decode(&body)?;
    let s = scenario(&st, req.scenario)?;
    let config = req.config.unwrap_or_else(|| json!({}));
    let id = if s.batting().is_some() {
        let cfg: BattingSearchConfig = decode(&Bytes::from(config.to_string())).map_err(prefix_config)?;
        cfg.validate().map_err(|e| ApiError::bad_request(Some("config"), e.to_string()))?;
        st.jobs.submit("audit", 1, move |_| {
            let r = report::audit_batting(&s, &cfg).map_err(|e| JobError::from(ApiError::from(e)))?;
            Ok(serde_json::to_value(r).expect("report serializes"))
        })
    } else {
        let cfg: SaConfig = decode(&Bytes::from(config.to_string())).map_err(prefix_config)?;
        cfg.validate().map_err(|e| ApiError::bad_request(Some("config"), e.to_string()))?;
        st.jobs.submit("audit", cfg.steps, move |_| {
            let r = report::audit_bowling(&s, &cfg).map_err(|e| JobError::from(ApiError::from(e)))?;
            Ok(serde_json::to_value(r).expect("report serializes"))
        })
    };
    Ok(accepted(id))
}

fn prefix_config(mut e: ApiError) -> ApiError {
    if let Some(f) = e.body.get("field").and_then(Value::as_str) {
        e.body["field"] = json!(format!("config.{f}"));
    }
    e
}

async fn job(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let id = Uuid::parse_str(&id).map_err(|_| ApiError::not_found(format!("no job {id}")))?;
    let view = st.jobs.get(&id).ok_or_else(|| ApiError::not_found(format!("no job {id}")))?;
    Ok(Json(serde_json::to_value(view).expect("job view serializes")))
}

async fn profile(State(st): State<AppState>, Path(player): Path<String>) -> Result<Json<Value>, ApiError> {
    let store = st.store.as_ref().ok_or_else(|| ApiError::not_found("no profile store is loaded"))?;
    let rows = |role: Role| -> Vec<Value> {
        t20_core::outcome::Phase::ALL
            .iter()
            .filter_map(|&ph| store.role(role).get(&player, ph))
            .map(|p| serde_json::to_value(p).expect("profile serializes"))
            .collect()
    };
    let (batting, bowling) = (rows(Role::Batsman), rows(Role::Bowler));
    if batting.is_empty() && bowling.is_empty() {
        return Err(ApiError::not_found(format!("unknown player {player:?}")));
    }
    Ok(Json(json!({
        "player": player,
        "batting": batting,
        "bowling": bowling,
        "corpus_hash": store.meta.corpus_hash,
    })))
}
