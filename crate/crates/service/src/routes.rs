use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post, put};
use axum::{Json, Router};
use knet_core::consultation::SessionDocument;
use knet_core::wire::{
    beliefs_view, event_view, findings_view, network_view, recommendation_view, resolve_findings,
    BeliefsView, EventView, NetworkView, RecommendationView,
};
use knet_core::{NetworkKind, NodeId, Session, SessionError};
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use crate::error::ApiError;
use crate::{AppState, Slot};

type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(state: AppState, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/kbs", get(list_kbs))
        .route("/kbs/{name}", get(get_kb))
        .route("/sessions", post(create_session))
        .route("/sessions/import", post(import_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/findings/{node}", put(put_finding).delete(delete_finding))
        .route("/sessions/{id}/beliefs", get(get_beliefs))
        .route("/sessions/{id}/recommendation", get(get_recommendation))
        .route("/sessions/{id}/whatif", post(what_if))
        .route("/sessions/{id}/history", get(history))
        .route("/sessions/{id}/export", get(export))
        .with_state(state)
        .layer(CorsLayer::permissive());
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload.map(|Json(v)| v).map_err(|e| ApiError::unprocessable("InvalidBody", e.body_text()))
}

fn slot(state: &AppState, id: &str) -> Result<Arc<Slot>, ApiError> {
    state.get(id).ok_or_else(|| ApiError::not_found("UnknownSession", format!("no session {id:?}")))
}

fn beliefs_of(session: &Session) -> BeliefsView {
    beliefs_view(session.network(), session.beliefs(), None, |p| p)
}

#[derive(Serialize)]
struct KbSummary {
    name: String,
    kind: NetworkKind,
    node_count: usize,
}

async fn list_kbs(State(state): State<AppState>) -> Json<Vec<KbSummary>> {
    Json(
        state
            .catalog
            .iter()
            .map(|(name, p)| KbSummary {
                name: name.to_owned(),
                kind: p.network().kind,
                node_count: p.network().nodes.len(),
            })
            .collect(),
    )
}

#[derive(Deserialize)]
struct KbQuery {
    #[serde(default)]
    tables: bool,
}

async fn get_kb(
    State(state): State<AppState>,
    UrlPath(name): UrlPath<String>,
    Query(q): Query<KbQuery>,
) -> ApiResult<NetworkView> {
    let kb = state
        .catalog
        .get(&name)
        .ok_or_else(|| ApiError::not_found("UnknownKb", format!("no knowledge base {name:?}")))?;
    Ok(Json(network_view(kb.network(), q.tables)))
}

#[derive(Deserialize)]
struct CreateSession {
    kb: String,
}

#[derive(Serialize)]
struct Created {
    session_id: String,
}

async fn create_session(
    State(state): State<AppState>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let req = body(payload)?;
    let kb = state
        .catalog
        .get(&req.kb)
        .ok_or_else(|| ApiError::not_found("UnknownKb", format!("no knowledge base {:?}", req.kb)))?;
    let session = Session::new(kb.clone(), req.kb)?;
    let session_id = state.insert(session);
    Ok((StatusCode::CREATED, Json(Created { session_id })))
}

async fn import_session(
    State(state): State<AppState>,
    payload: Result<Json<SessionDocument>, JsonRejection>,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let doc = body(payload)?;
    let kb = state
        .catalog
        .get(&doc.kb_name)
        .ok_or_else(|| ApiError::not_found("UnknownKb", format!("no knowledge base {:?}", doc.kb_name)))?;
    let session = Session::import(kb.clone(), &doc).map_err(|e| match e {
        SessionError::Finding(_) | SessionError::ImpossibleEvidence | SessionError::NotAsserted(_) => {
            ApiError::unprocessable("InvalidDocument", e.to_string())
        }
        other => other.into(),
    })?;
    let session_id = state.insert(session);
    Ok((StatusCode::CREATED, Json(Created { session_id })))
}

#[derive(Serialize)]
struct SessionSummary {
    session_id: String,
    kb: String,
    findings: BTreeMap<NodeId, String>,
    beliefs: BeliefsView,
    history_len: usize,
}

async fn get_session(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<SessionSummary> {
    let slot = slot(&state, &id)?;
    let s = slot.session.lock().await;
    Ok(Json(SessionSummary {
        session_id: s.id().to_owned(),
        kb: s.kb_name().to_owned(),
        findings: findings_view(s.network(), s.findings()),
        beliefs: beliefs_of(&s),
        history_len: s.history().len(),
    }))
}

#[derive(Deserialize)]
struct PutFinding {
    state: String,
}

async fn put_finding(
    State(state): State<AppState>,
    UrlPath((id, node)): UrlPath<(String, String)>,
    payload: Result<Json<PutFinding>, JsonRejection>,
) -> ApiResult<BeliefsView> {
    let slot = slot(&state, &id)?;
    let req = body(payload)?;
    let mut s = slot.session.lock().await;
    match s.assert_label(&node, &req.state) {
        Ok(_) => Ok(Json(beliefs_of(&s))),
        Err(e @ SessionError::ImpossibleEvidence) => Err(ApiError::from(e).with("beliefs", &beliefs_of(&s))),
        Err(e) => Err(e.into()),
    }
}

async fn delete_finding(
    State(state): State<AppState>,
    UrlPath((id, node)): UrlPath<(String, String)>,
) -> ApiResult<BeliefsView> {
    let slot = slot(&state, &id)?;
    let mut s = slot.session.lock().await;
    s.retract_finding(&node)?;
    Ok(Json(beliefs_of(&s)))
}

async fn get_beliefs(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<BeliefsView> {
    let slot = slot(&state, &id)?;
    let s = slot.session.lock().await;
    Ok(Json(beliefs_of(&s)))
}

async fn get_recommendation(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<RecommendationView> {
    let slot = slot(&state, &id)?;
    let mut s = slot.session.lock().await;
    let rec = s.recommendation()?.clone();
    Ok(Json(recommendation_view(s.network(), &rec)))
}

#[derive(Deserialize)]
struct WhatIfRequest {
    #[serde(default)]
    findings: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct WhatIfResponse {
    findings: BTreeMap<NodeId, String>,
    beliefs: BeliefsView,
    #[serde(skip_serializing_if = "Option::is_none")]
    recommendation: Option<RecommendationView>,
}

async fn what_if(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    payload: Result<Json<WhatIfRequest>, JsonRejection>,
) -> ApiResult<WhatIfResponse> {
    let slot = slot(&state, &id)?;
    let req = body(payload)?;
    let s = slot.session.lock().await;
    let net = s.network();
    let overlay = resolve_findings(net, req.findings.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    let out = s.what_if(&overlay)?;
    Ok(Json(WhatIfResponse {
        findings: findings_view(net, &out.findings),
        beliefs: beliefs_view(net, &out.beliefs, None, |p| p),
        recommendation: out.recommendation.as_ref().map(|r| recommendation_view(net, r)),
    }))
}

async fn history(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Vec<EventView>> {
    let slot = slot(&state, &id)?;
    let s = slot.session.lock().await;
    Ok(Json(s.history().iter().map(|e| event_view(s.network(), e)).collect()))
}

async fn export(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<SessionDocument> {
    let slot = slot(&state, &id)?;
    let s = slot.session.lock().await;
    Ok(Json(s.export()))
}
