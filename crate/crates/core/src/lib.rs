//! Community air-quality service.
//!
//! Polls a PurpleAir-compatible upstream under a strict request budget,
//! converts PM2.5 to EPA AQI, keeps rolling window averages per sensor and
//! serves them, alongside hazardous-waste sites and community pollution
//! reports, over an HTTP/JSON API.

pub mod api;
pub mod aqi;
pub mod cli;
pub mod config;
pub mod geo;
pub mod ingest;
pub mod state;
pub mod store;
pub mod timeseries;

use chrono::{DateTime, SecondsFormat, Utc};

/// ISO-8601 UTC with a `Z` suffix; fractional seconds only when present.
pub fn format_timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}
