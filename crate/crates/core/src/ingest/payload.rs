//! Upstream response normalization.
//!
//! Accepts a PurpleAir-style sensor document, either wrapped as
//! `{"sensor": {...}}` or bare. Recognized keys:
//!
//! | upstream key             | normalized                          |
//! |--------------------------|-------------------------------------|
//! | `pm2_5` or `pm2.5`       | `Reading::pm2_5` (µg/m³)            |
//! | `last_seen`              | `Reading::timestamp` (epoch seconds)|
//! | `temperature`            | `Reading::temperature`, °F → °C     |
//! | `humidity`               | `Reading::humidity` (%)             |
//! | `latitude`, `longitude`  | sensor location                     |
//! | `name`                   | sensor display name                 |
//!
//! Everything else is ignored.

use chrono::{DateTime, TimeZone, Utc};
use serde_json::{Map, Value};

use super::IngestError;
use crate::geo::GeoPoint;
use crate::timeseries::Reading;

/// An unvalidated upstream response body.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPayload {
    pub body: Vec<u8>,
    pub received_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedPayload {
    pub readings: Vec<Reading>,
    pub location: Option<GeoPoint>,
    pub name: Option<String>,
}

pub fn fahrenheit_to_celsius(f: f64) -> f64 {
    (f - 32.0) * 5.0 / 9.0
}

fn number(obj: &Map<String, Value>, key: &str) -> Option<f64> {
    obj.get(key).and_then(Value::as_f64)
}

pub fn parse_payload(raw: &RawPayload, sensor_id: &str) -> Result<ParsedPayload, IngestError> {
    let parse_err = |message: String| IngestError::Parse { sensor_id: sensor_id.to_owned(), message };

    let doc: Value = serde_json::from_slice(&raw.body).map_err(|e| parse_err(format!("invalid JSON: {e}")))?;
    let obj = match doc.get("sensor") {
        Some(Value::Object(inner)) => inner,
        _ => doc.as_object().ok_or_else(|| parse_err("payload is not a JSON object".into()))?,
    };

    let pm2_5 = number(obj, "pm2_5")
        .or_else(|| number(obj, "pm2.5"))
        .ok_or_else(|| parse_err("missing pm2_5 / pm2.5".into()))?;
    if !pm2_5.is_finite() || pm2_5 < 0.0 {
        return Err(IngestError::Validation {
            sensor_id: sensor_id.to_owned(),
            message: format!("pm2_5 {pm2_5} is negative"),
        });
    }
    let last_seen = obj
        .get("last_seen")
        .and_then(|v| v.as_i64().or_else(|| v.as_f64().map(|f| f as i64)))
        .ok_or_else(|| parse_err("missing last_seen".into()))?;
    let timestamp = Utc
        .timestamp_opt(last_seen, 0)
        .single()
        .ok_or_else(|| parse_err(format!("last_seen {last_seen} is out of range")))?;

    let location = match (number(obj, "latitude"), number(obj, "longitude")) {
        (Some(lat), Some(lon)) => GeoPoint::new(lat, lon).ok(),
        _ => None,
    };

    Ok(ParsedPayload {
        readings: vec![Reading {
            sensor_id: sensor_id.to_owned(),
            timestamp,
            pm2_5,
            temperature: number(obj, "temperature").map(fahrenheit_to_celsius),
            humidity: number(obj, "humidity"),
        }],
        location,
        name: obj.get("name").and_then(Value::as_str).map(str::to_owned),
    })
}
