//! REST surface over the service state. Every route authenticates the
//! bearer token; mutating routes are authorized and audited, and the
//! response bodies are the same JSON shapes the CLI prints.

use std::sync::Arc;

use asf_core::catalog::project_to_catalog;
use asf_core::experiment::{expand, generate, ExperimentConfig};
use asf_core::fair::{audit as fair_audit, AuditContext};
use asf_core::federation::{federate_entries, federated_search, DuplicatePolicy};
use asf_core::nlp::{find_provider, translate, SystemClock, TranslationRequest};
use asf_core::registry::{SearchQuery, ServiceEntry};
use asf_core::security::{apply_masking, Decision, Principal};
use asf_core::timefmt;
use asf_core::workflow::{default_executors, parse_workflow, run, RunOptions};
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::Deserialize;

use crate::state::ServiceState;

type AppState = Arc<ServiceState>;

pub fn app(state: AppState) -> Router {
    Router::new()
        .route("/entries", get(list_entries).post(create_entry))
        .route(
            "/entries/{id}",
            get(get_entry).put(update_entry).delete(remove_entry),
        )
        .route("/entries/{id}/heartbeat", get(heartbeat))
        .route("/search", get(search))
        .route("/catalog", get(catalog))
        .route("/federation/search", post(federation_search))
        .route("/fair/audit", post(fair_audit_route))
        .route("/workflows", post(submit_workflow))
        .route("/workflows/{run}/status", get(workflow_status))
        .route("/workflows/{run}", delete(cancel_workflow))
        .route("/ee/generate", post(ee_generate))
        .route("/translate", post(translate_route))
        .route("/audit", get(read_audit))
        .with_state(state)
}

/// Run the service until the process is stopped.
pub fn serve_blocking(state: AppState) -> std::io::Result<()> {
    let listen = state.config.listen();
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&listen).await?;
        eprintln!("asf service listening on {listen}");
        axum::serve(listener, app(state)).await
    })
}

struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn unauthorized(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNAUTHORIZED, message)
    }

    fn forbidden(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::FORBIDDEN, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, message)
    }

    fn unprocessable(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(serde_json::json!({ "error": self.message })),
        )
            .into_response()
    }
}

fn registry_error(e: asf_core::registry::RegistryError) -> ApiError {
    use asf_core::registry::RegistryError::*;
    match e {
        UnknownId(_) | UnknownUrl(_) => ApiError::not_found(e.to_string()),
        DuplicateId(_) | RetiredId(_) => ApiError::new(StatusCode::CONFLICT, e.to_string()),
        Invalid { .. } | NotApplicable(_) | CachingNotConfigured(_) => {
            ApiError::unprocessable(e.to_string())
        }
        Invocation(_) => ApiError::new(StatusCode::BAD_GATEWAY, e.to_string()),
    }
}

fn bearer_token(headers: &HeaderMap) -> Option<String> {
    headers
        .get(axum::http::header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(str::to_string)
}

/// Authenticate, authorize, and audit one request.
fn guard_request(
    state: &ServiceState,
    headers: &HeaderMap,
    action: &str,
    resource: &str,
) -> Result<Principal, ApiError> {
    let Some(token) = bearer_token(headers) else {
        let _ = state.audit.append(
            "anonymous",
            action,
            resource,
            asf_core::security::AuditOutcome::Deny,
        );
        return Err(ApiError::unauthorized("missing bearer token"));
    };
    let principal = state
        .authenticate(Some(&token), action, resource)
        .map_err(|e| ApiError::unauthorized(e.to_string()))?;
    match state
        .check(&principal, action, resource)
        .map_err(|e| ApiError::internal(e.to_string()))?
    {
        Decision::Allow => Ok(principal),
        Decision::Deny { reason } => Err(ApiError::forbidden(reason)),
    }
}

fn masked_json(
    state: &ServiceState,
    principal: &Principal,
    value: serde_json::Value,
) -> Json<serde_json::Value> {
    let mut value = value;
    apply_masking(&state.config.masking, principal, &mut value);
    Json(value)
}

async fn list_entries(
    State(state): State<AppState>,
    headers: HeaderMap,
) -> Result<Json<serde_json::Value>, ApiError> {
    let principal = guard_request(&state, &headers, "entries.read", state.registry_resource())?;
    let entries = state.store.list(&principal);
    Ok(masked_json(
        &state,
        &principal,
        serde_json::to_value(entries).expect("entries serialize"),
    ))
}

async fn create_entry(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(entry): Json<ServiceEntry>,
) -> Result<Response, ApiError> {
    let _principal = guard_request(&state, &headers, "entries.write", state.registry_resource())?;
    let id = state
        .store
        .register(entry, timefmt::now_utc())
        .map_err(registry_error)?;
    state
        .persist_store()
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok((
        StatusCode::CREATED,
        Json(serde_json::json!({ "id": id })),
    )
        .into_response())
}

async fn get_entry(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let principal = guard_request(&state, &headers, "entries.read", state.registry_resource())?;
    let entry = state.store.get(&id).map_err(registry_error)?;
    if principal.is_guest() && entry.public != Some(true) {
        return Err(ApiError::not_found(format!("no entry with id {id}")));
    }
    Ok(masked_json(
        &state,
        &principal,
        serde_json::to_value(entry).expect("entry serializes"),
    ))
}

async fn update_entry(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
    Json(mut entry): Json<ServiceEntry>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let _principal = guard_request(&state, &headers, "entries.write", state.registry_resource())?;
    entry.id.get_or_insert(id);
    let updated = state
        .store
        .update(entry, timefmt::now_utc())
        .map_err(registry_error)?;
    state
        .persist_store()
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(serde_json::to_value(updated).expect("entry serializes")))
}

async fn remove_entry(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let _principal = guard_request(&state, &headers, "entries.delete", state.registry_resource())?;
    state.store.remove(&id).map_err(registry_error)?;
    state
        .persist_store()
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(serde_json::json!({ "removed": id })))
}

async fn heartbeat(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let _principal = guard_request(
        &state,
        &headers,
        "entries.heartbeat",
        state.registry_resource(),
    )?;
    let status = state
        .store
        .check_heartbeat(&id, state.prober.as_ref())
        .map_err(registry_error)?;
    state
        .persist_store()
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(serde_json::to_value(status).expect("status serializes")))
}

#[derive(Debug, Deserialize)]
struct SearchParams {
    /// Comma-separated lists.
    #[serde(default)]
    keywords: Option<String>,
    #[serde(default)]
    tags: Option<String>,
    #[serde(default)]
    categories: Option<String>,
}

fn split_csv(value: &Option<String>) -> Vec<String> {
    value
        .as_deref()
        .map(|v| {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect()
        })
        .unwrap_or_default()
}

async fn search(
    State(state): State<AppState>,
    headers: HeaderMap,
    Query(params): Query<SearchParams>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let principal = guard_request(&state, &headers, "entries.read", state.registry_resource())?;
    let query = SearchQuery {
        keywords: split_csv(&params.keywords),
        tags: split_csv(&params.tags),
        categories: split_csv(&params.categories),
    };
    let hits = state.store.search(&query, &principal);
    Ok(masked_json(
        &state,
        &principal,
        serde_json::to_value(hits).expect("hits serialize"),
    ))
}

async fn catalog(
    State(state): State<AppState>,
    headers: HeaderMap,
) -> Result<Json<serde_json::Value>, ApiError> {
    let principal = guard_request(&state, &headers, "catalog.read", state.registry_resource())?;
    let catalog: Vec<_> = state
        .store
        .list(&principal)
        .iter()
        .map(project_to_catalog)
        .collect();
    Ok(Json(serde_json::to_value(catalog).expect("catalog serializes")))
}

#[derive(Debug, Deserialize)]
struct FederationSearchBody {
    members: Vec<FederationMember>,
    #[serde(default)]
    query: SearchQuery,
    #[serde(default)]
    policy: DuplicatePolicy,
}

#[derive(Debug, Deserialize)]
struct FederationMember {
    label: String,
    entries: Vec<ServiceEntry>,
}

async fn federation_search(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(body): Json<FederationSearchBody>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let principal = guard_request(&state, &headers, "federation.read", "federation")?;
    let members: Vec<(String, Vec<ServiceEntry>)> = body
        .members
        .into_iter()
        .map(|m| (m.label, m.entries))
        .collect();
    let view = federate_entries(members, body.policy)
        .map_err(|e| ApiError::unprocessable(e.to_string()))?;
    let hits = federated_search(&view, &body.query, &principal);
    Ok(Json(serde_json::to_value(hits).expect("hits serialize")))
}

#[derive(Debug, Deserialize)]
struct FairAuditBody {
    entry: ServiceEntry,
    #[serde(default)]
    context: Option<AuditContext>,
}

async fn fair_audit_route(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(body): Json<FairAuditBody>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let _principal = guard_request(&state, &headers, "fair.audit", "registry/public")?;
    let report = fair_audit(&body.entry, &body.context.unwrap_or_default());
    Ok(Json(serde_json::to_value(report).expect("report serializes")))
}

async fn submit_workflow(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: String,
) -> Result<Response, ApiError> {
    let _principal = guard_request(&state, &headers, "workflow.write", "workflows")?;
    let workflow = parse_workflow(&body).map_err(|e| ApiError::unprocessable(e.to_string()))?;
    let handle = run(
        workflow,
        &default_executors(),
        RunOptions {
            max_parallel: state.config.max_parallel,
            event_log: None,
        },
    )
    .map_err(|e| ApiError::unprocessable(e.to_string()))?;
    let run_id = handle.run_id().to_string();
    state
        .runs
        .lock()
        .expect("runs lock")
        .insert(run_id.clone(), handle);
    Ok((
        StatusCode::ACCEPTED,
        Json(serde_json::json!({ "run_id": run_id })),
    )
        .into_response())
}

async fn workflow_status(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(run_id): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let _principal = guard_request(&state, &headers, "workflow.read", "workflows")?;
    let handle = state
        .runs
        .lock()
        .expect("runs lock")
        .get(&run_id)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("unknown run id {run_id}")))?;
    Ok(Json(
        serde_json::to_value(handle.status()).expect("status serializes"),
    ))
}

async fn cancel_workflow(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(run_id): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let _principal = guard_request(&state, &headers, "workflow.delete", "workflows")?;
    let handle = state
        .runs
        .lock()
        .expect("runs lock")
        .get(&run_id)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("unknown run id {run_id}")))?;
    let finished = handle.is_finished();
    handle.cancel();
    Ok(Json(serde_json::json!({
        "run_id": run_id,
        "cancelled": !finished,
    })))
}

#[derive(Debug, Deserialize)]
struct EeGenerateBody {
    config: String,
    template: String,
    outdir: String,
    #[serde(default)]
    force: bool,
}

async fn ee_generate(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(body): Json<EeGenerateBody>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let _principal = guard_request(&state, &headers, "ee.write", "experiments")?;
    let config = ExperimentConfig::from_yaml(&body.config)
        .map_err(|e| ApiError::unprocessable(e.to_string()))?;
    let _count = expand(&config)
        .map_err(|e| ApiError::unprocessable(e.to_string()))?
        .len();
    let runset = generate(
        &config,
        &body.template,
        std::path::Path::new(&body.outdir),
        body.force,
    )
    .map_err(|e| ApiError::unprocessable(e.to_string()))?;
    let slugs: Vec<&str> = runset
        .runs
        .iter()
        .map(|r| r.assignment.slug.as_str())
        .collect();
    Ok(Json(serde_json::json!({
        "generated": runset.runs.len(),
        "slugs": slugs,
    })))
}

#[derive(Debug, Deserialize)]
struct TranslateBody {
    text: String,
    from: String,
    to: String,
    provider: String,
}

async fn translate_route(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(body): Json<TranslateBody>,
) -> Result<Response, ApiError> {
    let _principal = guard_request(&state, &headers, "nlp.translate", "providers")?;
    let request = TranslationRequest::new(body.text, body.from, body.to)
        .map_err(|e| ApiError::unprocessable(e.to_string()))?;
    let binding = find_provider(&state.providers, &body.provider)
        .map_err(|e| ApiError::not_found(e.to_string()))?;
    let record = translate(binding, &request, &SystemClock)
        .map_err(|e| ApiError::unprocessable(e.to_string()))?;
    // The canonical rendering keeps the 4-decimal time, byte-identical
    // with the CLI output.
    Ok((
        StatusCode::OK,
        [(axum::http::header::CONTENT_TYPE, "application/json")],
        record.to_json_string(),
    )
        .into_response())
}

async fn read_audit(
    State(state): State<AppState>,
    headers: HeaderMap,
) -> Result<Json<serde_json::Value>, ApiError> {
    let _principal = guard_request(&state, &headers, "audit.read", "audit")?;
    let records = state
        .audit
        .read_all()
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(serde_json::to_value(records).expect("records serialize")))
}
