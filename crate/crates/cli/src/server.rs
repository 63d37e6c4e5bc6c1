//! HTTP API consumed by the dashboard.

use std::net::SocketAddr;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use membrane_core::campaign::{Campaign, CampaignError};
use serde::Deserialize;

use crate::error::CliError;
use crate::service::{self, Command, SharedCampaign};

pub struct ApiError {
    status: StatusCode,
    body: CliError,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            body: CliError::new("invalid-request", message),
        }
    }
}

pub fn status_for(e: &CampaignError) -> StatusCode {
    use CampaignError::*;
    match e {
        NotFound(_) => StatusCode::NOT_FOUND,
        WrongGeneration { .. }
        | Overfull(_)
        | UnprintableChild(_)
        | PendingFitness(_)
        | Complete
        | ProxyCampaign
        | Exists(_) => StatusCode::CONFLICT,
        NegativeForce(_) | InvalidForce => StatusCode::UNPROCESSABLE_ENTITY,
        Invalid(_) | Config(_) | Genome(_) => StatusCode::BAD_REQUEST,
        Storage(_) | Corrupt(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<CampaignError> for ApiError {
    fn from(e: CampaignError) -> Self {
        ApiError {
            status: status_for(&e),
            body: e.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            [(header::CONTENT_TYPE, "application/json")],
            self.body.to_json(),
        )
            .into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

pub fn router(campaign: SharedCampaign) -> Router {
    Router::new()
        .route("/api/campaign", get(summary))
        .route("/api/generations/{g}", get(generation))
        .route("/api/generations/{g}/children/{i}/stl", get(stl))
        .route("/api/generations/{g}/children/{i}/profile", get(profile))
        .route("/api/generations/{g}/children/{i}/repeats", post(repeat))
        .route("/api/advance", post(advance))
        .route("/api/lineage", get(lineage))
        .route("/api/report", get(report))
        .with_state(campaign)
}

pub async fn serve(addr: SocketAddr, campaign: SharedCampaign) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(campaign))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Runs `f` under the campaign lock on the blocking pool.
async fn with_campaign<T, F>(c: SharedCampaign, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&mut Campaign) -> Result<T, CampaignError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&mut service::lock(&c)))
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            body: CliError::new("internal-error", e.to_string()),
        })?
        .map_err(ApiError::from)
}

fn parse_index(raw: &str, what: &str) -> Result<usize, ApiError> {
    raw.parse().map_err(|_| {
        ApiError::bad_request(format!(
            "{what} must be a non-negative integer, got '{raw}'"
        ))
    })
}

fn json<T: serde::Serialize>(v: &T) -> Response {
    Json(v).into_response()
}

async fn summary(State(c): State<SharedCampaign>) -> ApiResult {
    with_campaign(c, |c| Ok(json(&c.summary()))).await
}

async fn generation(State(c): State<SharedCampaign>, Path(g): Path<String>) -> ApiResult {
    let g = parse_index(&g, "generation")?;
    with_campaign(c, move |c| Ok(json(&service::generation_view(c, g)?))).await
}

async fn stl(State(c): State<SharedCampaign>, Path((g, i)): Path<(String, String)>) -> ApiResult {
    let (g, i) = (parse_index(&g, "generation")?, parse_index(&i, "child")?);
    let (id, bytes) = with_campaign(c, move |c| {
        Ok((c.child(g, i)?.id.clone(), c.child_stl(g, i)?))
    })
    .await?;
    Ok((
        [
            (header::CONTENT_TYPE, "model/stl".to_string()),
            (
                header::CONTENT_DISPOSITION,
                format!("attachment; filename=\"{id}.stl\""),
            ),
        ],
        bytes,
    )
        .into_response())
}

async fn profile(
    State(c): State<SharedCampaign>,
    Path((g, i)): Path<(String, String)>,
) -> ApiResult {
    let (g, i) = (parse_index(&g, "generation")?, parse_index(&i, "child")?);
    with_campaign(c, move |c| Ok(json(&service::profile_view(c, g, i)?))).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RepeatBody {
    force_newtons: f64,
}

async fn repeat(
    State(c): State<SharedCampaign>,
    Path((g, i)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult {
    let (g, i) = (parse_index(&g, "generation")?, parse_index(&i, "child")?);
    let body: RepeatBody = serde_json::from_slice(&body).map_err(|e| {
        ApiError::bad_request(format!("body must be {{\"force_newtons\": <number>}}: {e}"))
    })?;
    let cmd = Command::RecordRepeat {
        generation: g,
        child: i,
        force_newtons: body.force_newtons,
    };
    with_campaign(c, move |c| Ok(json(&service::execute(c, cmd)?))).await
}

async fn advance(State(c): State<SharedCampaign>) -> ApiResult {
    with_campaign(c, |c| Ok(json(&service::execute(c, Command::Advance)?))).await
}

async fn lineage(State(c): State<SharedCampaign>) -> ApiResult {
    with_campaign(c, |c| Ok(json(&c.lineage()))).await
}

#[derive(Deserialize)]
struct ReportQuery {
    format: Option<String>,
}

async fn report(State(c): State<SharedCampaign>, Query(q): Query<ReportQuery>) -> ApiResult {
    let csv = match q.format.as_deref() {
        None | Some("json") => false,
        Some("csv") => true,
        Some(other) => return Err(ApiError::bad_request(format!("unknown format '{other}'"))),
    };
    let report = with_campaign(c, |c| Ok(c.report())).await?;
    Ok(if csv {
        ([(header::CONTENT_TYPE, "text/csv")], report.to_csv()).into_response()
    } else {
        json(&report)
    })
}
