//! HTTP + JSON front end.
//!
//! Errors are returned as `{"code", "message", "field"?}` with a status
//! derived from the error kind. Request bodies are parsed here rather than
//! by axum extractors so malformed JSON gets the same error shape.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{parse_id_list, Service, SubjectRow, SubmitRequest};
use crate::analytics::{Format, ReportName, ReportOptions};
use crate::config::CampaignConfig;
use crate::error::{Error, Result};
use crate::model::{CampaignId, CampaignStatus};

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";

pub struct ApiError(pub Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

pub fn status_for(e: &Error) -> StatusCode {
    match e {
        Error::InvalidCredentials | Error::Unauthorized => StatusCode::UNAUTHORIZED,
        Error::UnknownCampaign(_)
        | Error::UnknownImage(_)
        | Error::UnknownAnnotator(_)
        | Error::UnknownReport(_) => StatusCode::NOT_FOUND,
        Error::StaleImage(_)
        | Error::DuplicateJudgment { .. }
        | Error::CampaignClosed(_)
        | Error::CampaignActive(_)
        | Error::InvalidTransition { .. } => StatusCode::CONFLICT,
        Error::Malformed(_) | Error::Json(_) => StatusCode::BAD_REQUEST,
        Error::Io(_) | Error::IncompleteCatalog { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "code": self.0.code(), "message": self.0.to_string() });
        if let Some(field) = self.0.field() {
            body["field"] = json!(field);
        }
        (status_for(&self.0), Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T> {
    serde_json::from_slice(body).map_err(|e| Error::Malformed(e.to_string()))
}

fn bearer(headers: &HeaderMap) -> Result<String> {
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(|t| t.trim().to_owned())
        .ok_or(Error::Unauthorized)
}

fn idempotency_key(headers: &HeaderMap) -> Option<String> {
    headers
        .get(IDEMPOTENCY_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::to_owned)
}

/// Runs a service call off the async workers; calls take campaign locks.
async fn blocking<T, F>(svc: &Arc<Service>, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Service) -> Result<T> + Send + 'static,
{
    let svc = svc.clone();
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| Error::Io(std::io::Error::other(e)))?
        .map_err(ApiError)
}

async fn admin<T, F>(svc: &Arc<Service>, headers: &HeaderMap, f: F) -> ApiResult<T>
where
    T: Serialize + DeserializeOwned + Send + 'static,
    F: FnOnce(&Service) -> Result<T> + Send + 'static,
{
    let token = bearer(headers)?;
    let key = idempotency_key(headers);
    svc.authorize_admin(&token)?;
    blocking(svc, move |s| s.idempotent("admin", key.as_deref(), || f(s))).await
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/api/login", post(login))
        .route("/api/logout", post(logout))
        .route("/api/task", get(task))
        .route("/api/judgment", post(judgment))
        .route("/api/language", put(language))
        .route("/api/messages/{lang}", get(messages))
        .route("/api/admin/campaigns", post(create_campaign))
        .route("/api/admin/campaigns/{id}", get(summary))
        .route("/api/admin/campaigns/{id}/annotators", post(annotators))
        .route("/api/admin/campaigns/{id}/images", post(images))
        .route("/api/admin/campaigns/{id}/features", post(features))
        .route("/api/admin/campaigns/{id}/subjects", post(subjects))
        .route("/api/admin/campaigns/{id}/status", post(status))
        .route(
            "/api/admin/campaigns/{id}/reports/{name}",
            get(report_get).post(report_post),
        )
        .route("/api/admin/campaigns/{id}/export", get(export))
        .with_state(service)
}

#[derive(Deserialize)]
struct LoginBody {
    username: String,
    password: String,
}

async fn login(State(svc): State<Arc<Service>>, body: Bytes) -> ApiResult<Response> {
    let b: LoginBody = parse(&body)?;
    let r = blocking(&svc, move |s| s.login(&b.username, &b.password)).await?;
    Ok(Json(r).into_response())
}

async fn logout(State(svc): State<Arc<Service>>, headers: HeaderMap) -> ApiResult<StatusCode> {
    svc.logout(&bearer(&headers)?);
    Ok(StatusCode::NO_CONTENT)
}

async fn task(State(svc): State<Arc<Service>>, headers: HeaderMap) -> ApiResult<Response> {
    let token = bearer(&headers)?;
    let t = blocking(&svc, move |s| s.next_task(&token)).await?;
    Ok(Json(t).into_response())
}

async fn judgment(
    State(svc): State<Arc<Service>>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let token = bearer(&headers)?;
    let key = idempotency_key(&headers);
    let req: SubmitRequest = parse(&body)?;
    let r = blocking(&svc, move |s| {
        let scope = s.annotator_scope(&token)?;
        s.idempotent(&scope, key.as_deref(), || s.submit_judgment(&token, req))
    })
    .await?;
    Ok(Json(r).into_response())
}

#[derive(Deserialize)]
struct LanguageBody {
    language: String,
}

async fn language(
    State(svc): State<Arc<Service>>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<StatusCode> {
    let token = bearer(&headers)?;
    let b: LanguageBody = parse(&body)?;
    blocking(&svc, move |s| s.set_language(&token, &b.language)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn messages(
    State(svc): State<Arc<Service>>,
    Path(lang): Path<String>,
) -> ApiResult<Response> {
    Ok(Json(svc.catalogs().catalog(&lang)?.clone()).into_response())
}

fn campaign_id(raw: &str) -> Result<CampaignId> {
    raw.parse()
        .map_err(|_| Error::UnknownCampaign(raw.to_owned()))
}

async fn create_campaign(
    State(svc): State<Arc<Service>>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let config: CampaignConfig = parse(&body)?;
    let c = admin(&svc, &headers, move |s| s.create_campaign(&config)).await?;
    svc.checkpoint()?;
    Ok((StatusCode::CREATED, Json(c)).into_response())
}

async fn summary(
    State(svc): State<Arc<Service>>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    let id = campaign_id(&id)?;
    Ok(Json(admin(&svc, &headers, move |s| s.summary(id)).await?).into_response())
}

#[derive(Deserialize)]
struct AnnotatorsBody {
    count: i64,
    #[serde(default)]
    language: Option<String>,
}

async fn annotators(
    State(svc): State<Arc<Service>>,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let id = campaign_id(&id)?;
    let b: AnnotatorsBody = parse(&body)?;
    let creds = admin(&svc, &headers, move |s| {
        s.generate_annotators(id, b.count, b.language.as_deref())
    })
    .await?;
    svc.checkpoint()?;
    Ok(Json(json!({ "credentials": creds })).into_response())
}

#[derive(Deserialize)]
struct ImagesBody {
    sources: Vec<String>,
}

async fn images(
    State(svc): State<Arc<Service>>,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let id = campaign_id(&id)?;
    let b: ImagesBody = parse(&body)?;
    let r = admin(&svc, &headers, move |s| s.add_images(id, &b.sources)).await?;
    svc.checkpoint()?;
    Ok(Json(r).into_response())
}

/// Body is feature CSV text.
async fn features(
    State(svc): State<Arc<Service>>,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let id = campaign_id(&id)?;
    let n = admin(&svc, &headers, move |s| s.attach_features_csv(id, &body)).await?;
    svc.checkpoint()?;
    Ok(Json(json!({ "attached": n })).into_response())
}

#[derive(Deserialize)]
struct SubjectsBody {
    rows: Vec<SubjectRow>,
}

async fn subjects(
    State(svc): State<Arc<Service>>,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let id = campaign_id(&id)?;
    let b: SubjectsBody = parse(&body)?;
    let r = admin(&svc, &headers, move |s| s.label_subjects(id, &b.rows)).await?;
    svc.checkpoint()?;
    Ok(Json(r).into_response())
}

#[derive(Deserialize)]
struct StatusBody {
    status: CampaignStatus,
}

async fn status(
    State(svc): State<Arc<Service>>,
    headers: HeaderMap,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let id = campaign_id(&id)?;
    let b: StatusBody = parse(&body)?;
    let c = admin(&svc, &headers, move |s| s.set_status(id, b.status)).await?;
    svc.checkpoint()?;
    Ok(Json(c).into_response())
}

#[derive(Default, Deserialize, Serialize)]
pub struct ReportQuery {
    #[serde(default)]
    pub format: Option<String>,
    #[serde(default)]
    pub exclude: Option<String>,
    /// Comma-separated image ids.
    #[serde(default)]
    pub no_sample: Option<String>,
}

/// POST body for reports whose no-sample list is too long for a URL.
#[derive(Default, Deserialize, Serialize)]
pub struct ReportBody {
    #[serde(default)]
    pub format: Option<String>,
    #[serde(default)]
    pub exclude: Option<String>,
    #[serde(default)]
    pub no_sample: Option<Vec<String>>,
}

async fn run_report(
    svc: Arc<Service>,
    headers: HeaderMap,
    id: String,
    name: String,
    body: ReportBody,
) -> ApiResult<Response> {
    let id = campaign_id(&id)?;
    let name: ReportName = name.parse()?;
    let format: Format = body.format.as_deref().unwrap_or("json").parse()?;
    let options = ReportOptions {
        exclude: body.exclude,
        no_sample: body.no_sample.map(|v| v.into_iter().collect()),
    };
    svc.authorize_admin(&bearer(&headers)?)?;
    let report = blocking(&svc, move |s| s.report(id, name, &options)).await?;
    Ok(match format {
        Format::Json => Json(report.to_json()).into_response(),
        Format::Csv => (
            [(header::CONTENT_TYPE, "text/csv; charset=utf-8")],
            report.to_csv(),
        )
            .into_response(),
    })
}

async fn report_get(
    State(svc): State<Arc<Service>>,
    headers: HeaderMap,
    Path((id, name)): Path<(String, String)>,
    Query(q): Query<ReportQuery>,
) -> ApiResult<Response> {
    let body = ReportBody {
        format: q.format,
        exclude: q.exclude,
        no_sample: q.no_sample.map(|s| parse_id_list(&s).into_iter().collect()),
    };
    run_report(svc, headers, id, name, body).await
}

async fn report_post(
    State(svc): State<Arc<Service>>,
    headers: HeaderMap,
    Path((id, name)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Response> {
    let body: ReportBody = if body.is_empty() {
        ReportBody::default()
    } else {
        parse(&body)?
    };
    run_report(svc, headers, id, name, body).await
}

#[derive(Deserialize)]
struct ExportQuery {
    #[serde(default)]
    seed: u64,
}

async fn export(
    State(svc): State<Arc<Service>>,
    headers: HeaderMap,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> ApiResult<Response> {
    let id = campaign_id(&id)?;
    svc.authorize_admin(&bearer(&headers)?)?;
    let body = blocking(&svc, move |s| s.export(id, q.seed)).await?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

/// Serves until ctrl-c, checkpointing the store every `checkpoint_every`
/// and once more on shutdown.
pub async fn serve(
    service: Arc<Service>,
    addr: SocketAddr,
    checkpoint_every: Option<Duration>,
) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    if let Some(every) = checkpoint_every {
        let svc = service.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(every);
            tick.tick().await;
            loop {
                tick.tick().await;
                let svc = svc.clone();
                let saved = tokio::task::spawn_blocking(move || svc.checkpoint()).await;
                if let Ok(Err(e)) = saved {
                    eprintln!("checkpoint failed: {e}");
                }
            }
        });
    }
    axum::serve(listener, router(service.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    service.checkpoint()
}
