//! Per-sensor payloads: the marker glyph and the info card.

use chrono::{DateTime, Duration, Utc};
use serde::Serialize;

use crate::aqi::{AqiCategory, AqiScale, AqiValue, Concentration};
use crate::geo::GeoPoint;
use crate::state::LiveData;
use crate::timeseries::{TimeseriesError, Window, WindowSummary};

/// Window shown by default on markers and the info card.
pub const DEFAULT_METRIC: Window = Window::TenMinutes;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurrentConditions {
    /// Time of the latest raw reading.
    pub timestamp: DateTime<Utc>,
    /// Latest raw PM2.5.
    pub pm2_5: f64,
    /// Window the AQI below was computed from: the 10-minute mean, or the
    /// latest reading alone when that window is empty.
    pub metric: Window,
    pub metric_pm2_5: f64,
    pub aqi: AqiValue,
    pub category: AqiCategory,
    pub guidance: String,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensorSummary {
    pub sensor_id: String,
    pub name: String,
    pub location: Option<GeoPoint>,
    pub online: bool,
    pub current: Option<CurrentConditions>,
    pub windows: Vec<WindowSummary>,
}

pub fn sensor_summary(
    live: &LiveData,
    sensor_id: &str,
    now: DateTime<Utc>,
    scale: &AqiScale,
    poll_interval: Duration,
) -> Result<SensorSummary, TimeseriesError> {
    let status = live.sensors.get(sensor_id).ok_or_else(|| TimeseriesError::UnknownSensor(sensor_id.to_owned()))?;
    let windows = live.readings.window_summaries(sensor_id, now, scale)?;
    let latest = live.readings.latest(sensor_id, now)?;

    let current = latest.map(|latest| {
        let (metric, metric_pm2_5) = windows
            .iter()
            .find(|w| w.window == DEFAULT_METRIC)
            .and_then(|w| w.mean_concentration.map(|m| (DEFAULT_METRIC, m)))
            .unwrap_or((Window::Realtime, latest.pm2_5));
        let aqi = scale.pm25_to_aqi(Concentration::new(metric_pm2_5).expect("stored readings are non-negative"));
        let category = scale.category(aqi);
        CurrentConditions {
            timestamp: latest.timestamp,
            pm2_5: latest.pm2_5,
            metric,
            metric_pm2_5,
            aqi,
            category: category.name,
            guidance: category.guidance.clone(),
            color: scale.marker_color(aqi).to_hex(),
        }
    });

    Ok(SensorSummary {
        sensor_id: sensor_id.to_owned(),
        name: status.name.clone(),
        location: status.location,
        online: status.is_online(now, poll_interval),
        current,
        windows,
    })
}

/// Summaries for every known sensor, in id order.
pub fn all_summaries(
    live: &LiveData,
    now: DateTime<Utc>,
    scale: &AqiScale,
    poll_interval: Duration,
) -> Vec<SensorSummary> {
    live.sensors.keys().filter_map(|id| sensor_summary(live, id, now, scale, poll_interval).ok()).collect()
}
