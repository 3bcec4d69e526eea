//! HTTP/JSON API. Handlers only read in-memory snapshots; nothing here ever
//! talks to the upstream sensor network.

mod error;
mod summary;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::header::{self, HeaderMap, HeaderName, HeaderValue};
use axum::http::{Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Duration, Utc};
use serde::Serialize;
use tower_http::cors::{Any, CorsLayer};

pub use error::ApiError;
pub use summary::{all_summaries, sensor_summary, CurrentConditions, SensorSummary, DEFAULT_METRIC};

use crate::aqi::{AqiScale, ConcentrationBand};
use crate::format_timestamp;
use crate::geo::{bbox_filter, cluster_sites, BoundingBox, GeoPoint, MAX_ZOOM};
use crate::ingest::Clock;
use crate::state::{ServiceMode, SharedData};
use crate::store::{
    write_reports_csv, HazardSite, HazardStore, PollutionReport, ReportCandidate, ReportFilter, ReportStatus,
    ReportStore,
};
use crate::timeseries::{SeriesPoint, TimeseriesError};

/// Response header carrying the instant the sensor data was computed for.
pub const DATA_AS_OF_HEADER: &str = "x-data-as-of";
pub const DEFAULT_TIMESERIES_POINTS: usize = 500;
pub const MAX_TIMESERIES_POINTS: usize = 10_000;

#[derive(Clone)]
pub struct AppState {
    pub data: Arc<SharedData>,
    pub clock: Arc<dyn Clock>,
    pub scale: Arc<AqiScale>,
    pub reports: Arc<Mutex<ReportStore>>,
    pub hazards: Arc<RwLock<HazardStore>>,
    pub admin_token: Option<String>,
    pub cluster_radius_px: f64,
}

impl AppState {
    pub fn new(data: Arc<SharedData>, clock: Arc<dyn Clock>) -> Self {
        Self {
            data,
            clock,
            scale: Arc::new(AqiScale::default()),
            reports: Arc::new(Mutex::new(ReportStore::in_memory(crate::store::DEFAULT_SERVICE_AREA))),
            hazards: Arc::new(RwLock::new(HazardStore::in_memory())),
            admin_token: None,
            cluster_radius_px: crate::geo::DEFAULT_CLUSTER_RADIUS_PX,
        }
    }
}

pub fn router(state: AppState) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers([header::CONTENT_TYPE, header::AUTHORIZATION])
        .expose_headers([HeaderName::from_static(DATA_AS_OF_HEADER)]);

    Router::new()
        .route("/api/sensors", get(list_sensors))
        .route("/api/sensors/{id}", get(get_sensor))
        .route("/api/sensors/{id}/timeseries", get(get_timeseries))
        .route("/api/hazards", get(list_hazards))
        .route("/api/reports", post(submit_report).get(list_reports))
        .route("/api/reports/{id}/review", post(review_report))
        .route("/api/meta/colorscale", get(colorscale))
        .route("/healthz", get(healthz))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .layer(cors)
        .with_state(state)
}

type ApiResult<T> = Result<T, ApiError>;

fn as_of_header(now: DateTime<Utc>) -> [(HeaderName, HeaderValue); 1] {
    let value = HeaderValue::from_str(&format_timestamp(now)).expect("timestamps are valid header values");
    [(HeaderName::from_static(DATA_AS_OF_HEADER), value)]
}

async fn list_sensors(State(s): State<AppState>) -> impl IntoResponse {
    let now = s.clock.now();
    let live = s.data.live.read().expect("live data lock poisoned");
    let body = all_summaries(&live, now, &s.scale, s.data.poll_interval);
    (as_of_header(now), Json(body))
}

async fn get_sensor(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let now = s.clock.now();
    let live = s.data.live.read().expect("live data lock poisoned");
    let body =
        sensor_summary(&live, &id, now, &s.scale, s.data.poll_interval).map_err(|_| ApiError::sensor_not_found(&id))?;
    Ok((as_of_header(now), Json(body)))
}

#[derive(Debug, Serialize)]
struct TimeseriesBody {
    sensor_id: String,
    from: DateTime<Utc>,
    to: DateTime<Utc>,
    max_points: usize,
    points: Vec<SeriesPoint>,
    bands: Vec<ConcentrationBand>,
}

fn parse_time(q: &HashMap<String, String>, name: &str) -> ApiResult<Option<DateTime<Utc>>> {
    q.get(name)
        .map(|v| {
            DateTime::parse_from_rfc3339(v)
                .map(|t| t.with_timezone(&Utc))
                .map_err(|e| ApiError::invalid_parameter(name, format!("{name} must be an RFC 3339 timestamp: {e}")))
        })
        .transpose()
}

async fn get_timeseries(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<impl IntoResponse> {
    let now = s.clock.now();
    let to = parse_time(&q, "to")?.unwrap_or(now);
    let from = parse_time(&q, "from")?.unwrap_or(to - Duration::hours(24));
    let max_points = match q.get("max_points") {
        None => DEFAULT_TIMESERIES_POINTS,
        Some(v) => v.parse::<usize>().ok().filter(|n| (2..=MAX_TIMESERIES_POINTS).contains(n)).ok_or_else(|| {
            ApiError::invalid_parameter(
                "max_points",
                format!("max_points must be an integer between 2 and {MAX_TIMESERIES_POINTS}"),
            )
        })?,
    };
    if from >= to {
        return Err(ApiError::invalid_parameter("from", "from must be earlier than to"));
    }
    let live = s.data.live.read().expect("live data lock poisoned");
    let points = live.readings.slice(&id, from, to, max_points).map_err(|e| match e {
        TimeseriesError::UnknownSensor(_) => ApiError::sensor_not_found(&id),
        other => ApiError::bad_request("invalid_parameter", other.to_string()),
    })?;
    let body = TimeseriesBody { sensor_id: id, from, to, max_points, points, bands: s.scale.bands() };
    Ok((as_of_header(now), Json(body)))
}

#[derive(Debug, Serialize)]
struct HazardCluster {
    centroid: GeoPoint,
    member_ids: Vec<String>,
    count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    site: Option<HazardSite>,
}

async fn list_hazards(
    State(s): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<Vec<HazardCluster>>> {
    let bbox = match q.get("bbox") {
        None => BoundingBox::WORLD,
        Some(v) => BoundingBox::parse(v).map_err(|e| ApiError::invalid_parameter("bbox", e.to_string()))?,
    };
    let zoom = q
        .get("zoom")
        .ok_or_else(|| ApiError::invalid_parameter("zoom", "zoom is required"))?
        .parse::<u8>()
        .ok()
        .filter(|z| *z <= MAX_ZOOM)
        .ok_or_else(|| {
            ApiError::invalid_parameter("zoom", format!("zoom must be an integer between 0 and {MAX_ZOOM}"))
        })?;

    let hazards = s.hazards.read().expect("hazard lock poisoned");
    let visible = bbox_filter(&hazards.sites(), &bbox, |h| h.location);
    let points: Vec<(&str, GeoPoint)> = visible.iter().map(|h| (h.site_id.as_str(), h.location)).collect();
    let clusters = cluster_sites(&points, zoom, s.cluster_radius_px)
        .into_iter()
        .map(|c| {
            let site = (c.count == 1).then(|| hazards.get(&c.member_ids[0]).cloned()).flatten();
            HazardCluster { centroid: c.centroid, member_ids: c.member_ids, count: c.count, site }
        })
        .collect();
    Ok(Json(clusters))
}

async fn submit_report(State(s): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<PollutionReport>)> {
    let value: serde_json::Value = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request("invalid_json", format!("request body is not valid JSON: {e}")))?;
    if !value.is_object() {
        return Err(ApiError::bad_request("invalid_json", "request body must be a JSON object"));
    }
    let candidate: ReportCandidate = serde_json::from_value(value)
        .map_err(|e| ApiError::bad_request("validation_failed", format!("report has the wrong shape: {e}")))?;
    let now = s.clock.now();
    let report = s.reports.lock().expect("report lock poisoned").submit(&candidate, now)?;
    Ok((StatusCode::CREATED, Json(report)))
}

fn require_admin(s: &AppState, headers: &HeaderMap) -> ApiResult<()> {
    let Some(expected) = s.admin_token.as_deref().filter(|t| !t.is_empty()) else {
        return Err(ApiError::new(StatusCode::FORBIDDEN, "admin_disabled", "no admin token is configured"));
    };
    let presented =
        headers.get(header::AUTHORIZATION).and_then(|v| v.to_str().ok()).and_then(|v| v.strip_prefix("Bearer "));
    if presented.map(str::trim) == Some(expected) {
        Ok(())
    } else {
        Err(ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "a valid admin bearer token is required"))
    }
}

async fn list_reports(
    State(s): State<AppState>,
    headers: HeaderMap,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    require_admin(&s, &headers)?;
    let status = q
        .get("status")
        .map(|v| {
            ReportStatus::parse(v)
                .ok_or_else(|| ApiError::invalid_parameter("status", "status must be new or reviewed"))
        })
        .transpose()?;
    let bbox = q
        .get("bbox")
        .map(|v| BoundingBox::parse(v).map_err(|e| ApiError::invalid_parameter("bbox", e.to_string())))
        .transpose()?;
    let filter = ReportFilter { status, bbox, from: parse_time(&q, "from")?, to: parse_time(&q, "to")? };
    let reports = s.reports.lock().expect("report lock poisoned").list(&filter);

    match q.get("format").map(String::as_str) {
        None | Some("json") => Ok(Json(reports).into_response()),
        Some("csv") => {
            let mut out = Vec::new();
            write_reports_csv(&reports, &mut out).map_err(|e| ApiError::internal(e.to_string()))?;
            Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], out).into_response())
        }
        Some(_) => Err(ApiError::invalid_parameter("format", "format must be json or csv")),
    }
}

async fn review_report(
    State(s): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> ApiResult<Json<PollutionReport>> {
    require_admin(&s, &headers)?;
    let report = s.reports.lock().expect("report lock poisoned").mark_reviewed(&id)?;
    Ok(Json(report))
}

async fn colorscale(State(s): State<AppState>) -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "application/json")], s.scale.source_json().to_owned())
}

#[derive(Debug, Serialize)]
struct HealthBody {
    status: &'static str,
    mode: ServiceMode,
    sensors_online: usize,
    last_poll_at: Option<DateTime<Utc>>,
}

async fn healthz(State(s): State<AppState>) -> ApiResult<Json<HealthBody>> {
    let health = s.data.health.read().expect("health lock poisoned").clone();
    if !health.is_ready() {
        let message = match health.mode {
            ServiceMode::Live => "no poll cycle has succeeded yet",
            ServiceMode::Replay => "replay dataset not loaded yet",
        };
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "not_ready", message));
    }
    let now = s.clock.now();
    let sensors_online = s.data.live.read().expect("live data lock poisoned").online_count(now, s.data.poll_interval);
    Ok(Json(HealthBody { status: "ok", mode: health.mode, sensors_online, last_poll_at: health.last_poll_at }))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not allowed on this endpoint")
}
