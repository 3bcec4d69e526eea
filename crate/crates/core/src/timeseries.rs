//! Per-sensor reading history, rolling window averages and chart slicing.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Bound;
use std::str::FromStr;

use chrono::{DateTime, Duration, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aqi::{AqiScale, AqiValue, ColorRgb, Concentration};

/// How far into the future a reading may be stamped relative to the ingest clock.
pub const CLOCK_SKEW_ALLOWANCE_SECS: i64 = 60;

pub const DEFAULT_RETENTION_DAYS: i64 = 8;

#[derive(Debug, Error, PartialEq)]
pub enum TimeseriesError {
    #[error("invalid reading from {sensor_id}: {reason}")]
    InvalidReading { sensor_id: String, reason: String },
    #[error("unknown sensor {0}")]
    UnknownSensor(String),
    #[error("range start {from} is not before end {to}")]
    InvertedRange { from: DateTime<Utc>, to: DateTime<Utc> },
    #[error("max_points must be at least 2, got {0}")]
    MaxPoints(usize),
    #[error("retention must be at least 8 days, got {0} s")]
    Retention(i64),
}

/// One PM2.5 measurement from one sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub sensor_id: String,
    pub timestamp: DateTime<Utc>,
    pub pm2_5: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub humidity: Option<f64>,
}

impl Reading {
    pub fn new(sensor_id: impl Into<String>, timestamp: DateTime<Utc>, pm2_5: f64) -> Self {
        Self { sensor_id: sensor_id.into(), timestamp, pm2_5, temperature: None, humidity: None }
    }

    /// Checks the reading against the ingest clock.
    pub fn validate(&self, now: DateTime<Utc>) -> Result<(), TimeseriesError> {
        let fail = |reason: String| Err(TimeseriesError::InvalidReading { sensor_id: self.sensor_id.clone(), reason });
        if self.sensor_id.is_empty() {
            return fail("empty sensor id".into());
        }
        if Concentration::new(self.pm2_5).is_err() {
            return fail(format!("pm2_5 {} must be a finite value >= 0", self.pm2_5));
        }
        if self.timestamp > now + Duration::seconds(CLOCK_SKEW_ALLOWANCE_SECS) {
            return fail(format!("timestamp {} is in the future (clock {now})", self.timestamp));
        }
        if self.temperature.is_some_and(|t| !t.is_finite()) {
            return fail("temperature is not finite".into());
        }
        if self.humidity.is_some_and(|h| !h.is_finite()) {
            return fail("humidity is not finite".into());
        }
        Ok(())
    }
}

/// Averaging intervals, shortest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Window {
    #[serde(rename = "realtime")]
    Realtime,
    #[serde(rename = "10min")]
    TenMinutes,
    #[serde(rename = "30min")]
    ThirtyMinutes,
    #[serde(rename = "60min")]
    SixtyMinutes,
    #[serde(rename = "6hour")]
    SixHours,
    #[serde(rename = "24hour")]
    TwentyFourHours,
    #[serde(rename = "1week")]
    OneWeek,
}

impl Window {
    pub const ALL: [Window; 7] = [
        Window::Realtime,
        Window::TenMinutes,
        Window::ThirtyMinutes,
        Window::SixtyMinutes,
        Window::SixHours,
        Window::TwentyFourHours,
        Window::OneWeek,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Window::Realtime => "realtime",
            Window::TenMinutes => "10min",
            Window::ThirtyMinutes => "30min",
            Window::SixtyMinutes => "60min",
            Window::SixHours => "6hour",
            Window::TwentyFourHours => "24hour",
            Window::OneWeek => "1week",
        }
    }

    /// Zero for `realtime`, which means "latest reading".
    pub fn duration_secs(self) -> i64 {
        match self {
            Window::Realtime => 0,
            Window::TenMinutes => 600,
            Window::ThirtyMinutes => 1_800,
            Window::SixtyMinutes => 3_600,
            Window::SixHours => 21_600,
            Window::TwentyFourHours => 86_400,
            Window::OneWeek => 604_800,
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Window {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Window::ALL.into_iter().find(|w| w.name() == s).ok_or_else(|| format!("unknown window {s:?}"))
    }
}

/// Ring data for one window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowSummary {
    pub window: Window,
    pub mean_concentration: Option<f64>,
    pub aqi: Option<AqiValue>,
    #[serde(serialize_with = "crate::aqi::serialize_hex_opt")]
    pub color: Option<ColorRgb>,
    pub sample_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub mean: Option<f64>,
    pub count: usize,
}

/// One chart point. `count` is the number of raw readings it stands for.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub timestamp: DateTime<Utc>,
    pub pm2_5: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppendOutcome {
    Appended,
    Duplicate,
}

/// Readings for every sensor, keyed by whole-second timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadingStore {
    series: BTreeMap<String, BTreeMap<i64, Reading>>,
    retention: Duration,
}

impl Default for ReadingStore {
    fn default() -> Self {
        Self { series: BTreeMap::new(), retention: Duration::days(DEFAULT_RETENTION_DAYS) }
    }
}

impl ReadingStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Retention must leave the one-week window computable.
    pub fn with_retention(retention: Duration) -> Result<Self, TimeseriesError> {
        if retention < Duration::days(8) {
            return Err(TimeseriesError::Retention(retention.num_seconds()));
        }
        Ok(Self { series: BTreeMap::new(), retention })
    }

    pub fn retention(&self) -> Duration {
        self.retention
    }

    /// Makes a sensor known to the store before it has any data.
    pub fn register_sensor(&mut self, sensor_id: &str) {
        self.series.entry(sensor_id.to_owned()).or_default();
    }

    pub fn contains_sensor(&self, sensor_id: &str) -> bool {
        self.series.contains_key(sensor_id)
    }

    pub fn sensor_ids(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.series.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Inserts a reading in time order. Sub-second precision is dropped; a
    /// second reading for the same (sensor, second) is a duplicate.
    pub fn append(&mut self, mut reading: Reading, now: DateTime<Utc>) -> Result<AppendOutcome, TimeseriesError> {
        reading.validate(now)?;
        let secs = reading.timestamp.timestamp();
        reading.timestamp = Utc.timestamp_opt(secs, 0).single().expect("whole seconds are valid");
        let series = self.series.entry(reading.sensor_id.clone()).or_default();
        if series.contains_key(&secs) {
            return Ok(AppendOutcome::Duplicate);
        }
        series.insert(secs, reading);
        Ok(AppendOutcome::Appended)
    }

    fn series(&self, sensor_id: &str) -> Result<&BTreeMap<i64, Reading>, TimeseriesError> {
        self.series.get(sensor_id).ok_or_else(|| TimeseriesError::UnknownSensor(sensor_id.to_owned()))
    }

    /// All readings for a sensor, oldest first.
    pub fn readings(&self, sensor_id: &str) -> Result<impl Iterator<Item = &Reading>, TimeseriesError> {
        Ok(self.series(sensor_id)?.values())
    }

    /// Newest reading at or before `now`.
    pub fn latest(&self, sensor_id: &str, now: DateTime<Utc>) -> Result<Option<&Reading>, TimeseriesError> {
        Ok(self.series(sensor_id)?.range(..=now.timestamp()).next_back().map(|(_, r)| r))
    }

    /// Mean and sample count over `(now - duration, now]`; `realtime` is the
    /// latest reading alone.
    pub fn window_stats(
        &self,
        sensor_id: &str,
        window: Window,
        now: DateTime<Utc>,
    ) -> Result<WindowStats, TimeseriesError> {
        if window == Window::Realtime {
            let latest = self.latest(sensor_id, now)?;
            return Ok(WindowStats { mean: latest.map(|r| r.pm2_5), count: latest.map_or(0, |_| 1) });
        }
        let series = self.series(sensor_id)?;
        let end = now.timestamp();
        let start = end - window.duration_secs();
        let (sum, count) = series
            .range((Bound::Excluded(start), Bound::Included(end)))
            .fold((0.0, 0usize), |(s, n), (_, r)| (s + r.pm2_5, n + 1));
        Ok(WindowStats { mean: (count > 0).then(|| sum / count as f64), count })
    }

    pub fn window_average(
        &self,
        sensor_id: &str,
        window: Window,
        now: DateTime<Utc>,
    ) -> Result<Option<f64>, TimeseriesError> {
        Ok(self.window_stats(sensor_id, window, now)?.mean)
    }

    /// One summary per window in declaration order. The AQI is that of the
    /// mean concentration, never a mean of per-reading AQIs.
    pub fn window_summaries(
        &self,
        sensor_id: &str,
        now: DateTime<Utc>,
        scale: &AqiScale,
    ) -> Result<Vec<WindowSummary>, TimeseriesError> {
        Window::ALL
            .into_iter()
            .map(|window| {
                let stats = self.window_stats(sensor_id, window, now)?;
                let aqi = stats
                    .mean
                    .map(|m| scale.pm25_to_aqi(Concentration::new(m).expect("stored readings are non-negative")));
                Ok(WindowSummary {
                    window,
                    mean_concentration: stats.mean,
                    aqi,
                    color: aqi.map(|a| scale.marker_color(a)),
                    sample_count: stats.count,
                })
            })
            .collect()
    }

    /// Readings in `[from, to]`, downsampled to at most `max_points`.
    ///
    /// When downsampling, the first and last readings are kept as-is and the
    /// interior readings are grouped into `max_points - 2` equal-width time
    /// buckets spanning first..last. Each non-empty bucket becomes one point
    /// at the bucket center carrying the bucket mean.
    pub fn slice(
        &self,
        sensor_id: &str,
        from: DateTime<Utc>,
        to: DateTime<Utc>,
        max_points: usize,
    ) -> Result<Vec<SeriesPoint>, TimeseriesError> {
        let series = self.series(sensor_id)?;
        if from >= to {
            return Err(TimeseriesError::InvertedRange { from, to });
        }
        if max_points < 2 {
            return Err(TimeseriesError::MaxPoints(max_points));
        }
        // Whole-second keys: round `from` up and `to` down so the range is exact.
        let lo = from.timestamp() + i64::from(from.timestamp_subsec_nanos() > 0);
        let hi = to.timestamp();
        let raw: Vec<&Reading> = series.range(lo..=hi).map(|(_, r)| r).collect();
        let point = |r: &Reading| SeriesPoint { timestamp: r.timestamp, pm2_5: r.pm2_5, count: 1 };
        if raw.len() <= max_points {
            return Ok(raw.into_iter().map(point).collect());
        }

        let (first, last) = (raw[0], raw[raw.len() - 1]);
        let buckets = (max_points - 2) as i64;
        let t0 = first.timestamp.timestamp();
        let span = last.timestamp.timestamp() - t0;
        let mut sums = vec![(0.0f64, 0usize); buckets as usize];
        for r in &raw[1..raw.len() - 1] {
            let offset = r.timestamp.timestamp() - t0;
            let idx = ((offset as i128 * buckets as i128) / span as i128).min(buckets as i128 - 1) as usize;
            sums[idx].0 += r.pm2_5;
            sums[idx].1 += 1;
        }

        let mut out = Vec::with_capacity(max_points);
        out.push(point(first));
        let t0_ms = t0 * 1000;
        let span_ms = span as i128 * 1000;
        for (k, &(sum, n)) in sums.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let center_ms = t0_ms + (((2 * k as i128 + 1) * span_ms) / (2 * buckets as i128)) as i64;
            out.push(SeriesPoint {
                timestamp: Utc.timestamp_millis_opt(center_ms).single().expect("inside the slice range"),
                pm2_5: sum / n as f64,
                count: n,
            });
        }
        out.push(point(last));
        Ok(out)
    }

    /// Drops readings older than `now - retention`.
    pub fn prune(&mut self, now: DateTime<Utc>) -> usize {
        let cutoff = (now - self.retention).timestamp();
        let mut removed = 0;
        for series in self.series.values_mut() {
            let kept = series.split_off(&cutoff);
            removed += series.len();
            *series = kept;
        }
        removed
    }
}
