//! Service configuration: a JSON file, overridden by environment variables,
//! overridden by command-line flags.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::geo::{BoundingBox, GeoPoint, DEFAULT_CLUSTER_RADIUS_PX};
use crate::ingest::poller::{
    DEFAULT_BASE_URL, DEFAULT_MIN_REQUEST_INTERVAL_SECS, DEFAULT_POLL_INTERVAL_SECS, DEFAULT_REQUEST_TIMEOUT_SECS,
};
use crate::ingest::UpstreamConfig;
use crate::store::DEFAULT_SERVICE_AREA;
use crate::timeseries::DEFAULT_RETENTION_DAYS;

pub const DEFAULT_BIND_ADDR: &str = "127.0.0.1:8080";
pub const DEFAULT_DATA_DIR: &str = "data";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config file {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_owned(), message: message.into() }
}

/// Display name and position for a configured sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorEntry {
    pub id: String,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub lat: Option<f64>,
    #[serde(default)]
    pub lon: Option<f64>,
}

impl SensorEntry {
    pub fn location(&self) -> Option<GeoPoint> {
        match (self.lat, self.lon) {
            (Some(lat), Some(lon)) => GeoPoint::new(lat, lon).ok(),
            _ => None,
        }
    }
}

/// Every key is optional; unset keys fall through to env or defaults.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub upstream_base_url: Option<String>,
    pub upstream_api_key: Option<String>,
    pub sensor_ids: Option<Vec<String>>,
    pub sensors: Option<Vec<SensorEntry>>,
    pub poll_interval_secs: Option<u64>,
    pub min_request_interval_secs: Option<u64>,
    pub request_timeout_secs: Option<u64>,
    pub bind_addr: Option<String>,
    pub admin_token: Option<String>,
    pub data_dir: Option<PathBuf>,
    pub aqi_scale_path: Option<PathBuf>,
    pub retention_days: Option<i64>,
    pub service_area: Option<String>,
    pub cluster_radius_px: Option<f64>,
}

impl FileConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        serde_json::from_str(&text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })
    }
}

/// Values given on the command line. They win over everything else.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub bind_addr: Option<String>,
    pub data_dir: Option<PathBuf>,
    pub admin_token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ServiceConfig {
    pub upstream_base_url: Url,
    pub upstream_api_key: Option<String>,
    pub sensors: Vec<SensorEntry>,
    pub poll_interval_secs: u64,
    pub min_request_interval_secs: u64,
    pub request_timeout_secs: u64,
    pub bind_addr: SocketAddr,
    pub admin_token: Option<String>,
    pub data_dir: PathBuf,
    pub aqi_scale_path: Option<PathBuf>,
    pub retention_days: i64,
    pub service_area: BoundingBox,
    pub cluster_radius_px: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self::resolve(FileConfig::default(), |_| None, &Overrides::default()).expect("defaults are valid")
    }
}

fn parse_env<T: std::str::FromStr>(key: &str, value: Option<String>) -> Result<Option<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.map(|v| v.trim().parse::<T>().map_err(|e| invalid(key, format!("cannot parse {v:?}: {e}")))).transpose()
}

impl ServiceConfig {
    /// Layers `file`, then `env`, then `flags`, and validates the result.
    pub fn resolve(
        file: FileConfig,
        env: impl Fn(&str) -> Option<String>,
        flags: &Overrides,
    ) -> Result<Self, ConfigError> {
        let env = |key: &str| env(key).filter(|v| !v.trim().is_empty());

        let base_url =
            env("UPSTREAM_BASE_URL").or(file.upstream_base_url).unwrap_or_else(|| DEFAULT_BASE_URL.to_owned());
        let upstream_base_url =
            Url::parse(&base_url).map_err(|e| invalid("upstream_base_url", format!("{base_url:?}: {e}")))?;
        if !matches!(upstream_base_url.scheme(), "http" | "https") {
            return Err(invalid("upstream_base_url", "must be an http or https URL"));
        }

        let mut sensors = file.sensors.unwrap_or_default();
        let listed: Option<Vec<String>> = match env("SENSOR_IDS") {
            Some(v) => Some(v.split(',').map(|s| s.trim().to_owned()).filter(|s| !s.is_empty()).collect()),
            None => file.sensor_ids,
        };
        for id in listed.unwrap_or_default() {
            if !sensors.iter().any(|s| s.id == id) {
                sensors.push(SensorEntry { id, name: None, lat: None, lon: None });
            }
        }
        for s in &sensors {
            if s.id.trim().is_empty() {
                return Err(invalid("sensors", "sensor ids must be non-empty"));
            }
            if (s.lat.is_some() || s.lon.is_some()) && s.location().is_none() {
                return Err(invalid("sensors", format!("sensor {}: lat/lon must both be set and in range", s.id)));
            }
        }
        sensors.sort_by(|a, b| a.id.cmp(&b.id));
        sensors.dedup_by(|a, b| a.id == b.id);

        let poll_interval_secs = parse_env("POLL_INTERVAL_SECS", env("POLL_INTERVAL_SECS"))?
            .or(file.poll_interval_secs)
            .unwrap_or(DEFAULT_POLL_INTERVAL_SECS);
        let min_request_interval_secs = parse_env("MIN_REQUEST_INTERVAL_SECS", env("MIN_REQUEST_INTERVAL_SECS"))?
            .or(file.min_request_interval_secs)
            .unwrap_or(DEFAULT_MIN_REQUEST_INTERVAL_SECS);
        let request_timeout_secs = parse_env("REQUEST_TIMEOUT_SECS", env("REQUEST_TIMEOUT_SECS"))?
            .or(file.request_timeout_secs)
            .unwrap_or(DEFAULT_REQUEST_TIMEOUT_SECS);
        if poll_interval_secs == 0 {
            return Err(invalid("poll_interval_secs", "must be positive"));
        }
        if min_request_interval_secs == 0 {
            return Err(invalid("min_request_interval_secs", "must be positive"));
        }
        if request_timeout_secs == 0 {
            return Err(invalid("request_timeout_secs", "must be positive"));
        }

        let bind = flags
            .bind_addr
            .clone()
            .or(env("BIND_ADDR"))
            .or(file.bind_addr)
            .unwrap_or_else(|| DEFAULT_BIND_ADDR.to_owned());
        let bind_addr = bind.parse::<SocketAddr>().map_err(|e| invalid("bind_addr", format!("{bind:?}: {e}")))?;

        let admin_token =
            flags.admin_token.clone().or(env("ADMIN_TOKEN")).or(file.admin_token).filter(|t| !t.is_empty());
        let upstream_api_key = env("UPSTREAM_API_KEY").or(file.upstream_api_key).filter(|t| !t.is_empty());
        let data_dir = flags
            .data_dir
            .clone()
            .or(env("DATA_DIR").map(PathBuf::from))
            .or(file.data_dir)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR));
        let aqi_scale_path = env("AQI_SCALE_PATH").map(PathBuf::from).or(file.aqi_scale_path);

        let retention_days = parse_env("RETENTION_DAYS", env("RETENTION_DAYS"))?
            .or(file.retention_days)
            .unwrap_or(DEFAULT_RETENTION_DAYS);
        if retention_days < DEFAULT_RETENTION_DAYS {
            return Err(invalid("retention_days", format!("must be at least {DEFAULT_RETENTION_DAYS}")));
        }

        let service_area = match env("SERVICE_AREA").or(file.service_area) {
            Some(v) => BoundingBox::parse(&v).map_err(|e| invalid("service_area", e.to_string()))?,
            None => DEFAULT_SERVICE_AREA,
        };
        let cluster_radius_px = parse_env("CLUSTER_RADIUS_PX", env("CLUSTER_RADIUS_PX"))?
            .or(file.cluster_radius_px)
            .unwrap_or(DEFAULT_CLUSTER_RADIUS_PX);
        if !(cluster_radius_px.is_finite() && cluster_radius_px > 0.0) {
            return Err(invalid("cluster_radius_px", "must be a positive number"));
        }

        Ok(Self {
            upstream_base_url,
            upstream_api_key,
            sensors,
            poll_interval_secs,
            min_request_interval_secs,
            request_timeout_secs,
            bind_addr,
            admin_token,
            data_dir,
            aqi_scale_path,
            retention_days,
            service_area,
            cluster_radius_px,
        })
    }

    /// Reads the optional file and the process environment.
    pub fn load(path: Option<&Path>, flags: &Overrides) -> Result<Self, ConfigError> {
        let file = path.map(FileConfig::load).transpose()?.unwrap_or_default();
        Self::resolve(file, |k| std::env::var(k).ok(), flags)
    }

    pub fn sensor_ids(&self) -> Vec<String> {
        self.sensors.iter().map(|s| s.id.clone()).collect()
    }

    pub fn upstream(&self) -> UpstreamConfig {
        UpstreamConfig {
            base_url: self.upstream_base_url.clone(),
            api_key: self.upstream_api_key.clone(),
            sensor_ids: self.sensor_ids(),
            poll_interval_secs: self.poll_interval_secs,
            min_request_interval_secs: self.min_request_interval_secs,
            request_timeout_secs: self.request_timeout_secs,
        }
    }

    /// The effective configuration as JSON, with secrets masked.
    pub fn redacted(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        for key in ["upstream_api_key", "admin_token"] {
            if v[key].is_string() {
                v[key] = serde_json::Value::String("<redacted>".into());
            }
        }
        v
    }
}
