//! Loading a captured readings journal as if it were arriving live.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};

use chrono::{DateTime, Utc};
use serde::Serialize;

use super::clock::{Clock, ManualClock, ScaledClock};
use super::IngestError;
use crate::state::SharedData;
use crate::timeseries::Reading;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReplaySpeed {
    /// Load everything at once; the virtual clock stops at the last reading.
    Instant,
    /// Virtual seconds per wall-clock second.
    Factor(f64),
}

impl FromStr for ReplaySpeed {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "instant" | "∞" => Ok(ReplaySpeed::Instant),
            other => match other.parse::<f64>() {
                Ok(f) if f.is_infinite() && f > 0.0 => Ok(ReplaySpeed::Instant),
                Ok(f) if f.is_finite() && f > 0.0 => Ok(ReplaySpeed::Factor(f)),
                _ => Err(format!("speed must be a positive number or \"inf\", got {s:?}")),
            },
        }
    }
}

impl fmt::Display for ReplaySpeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReplaySpeed::Instant => f.write_str("inf"),
            ReplaySpeed::Factor(x) => write!(f, "{x}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedLine {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReplayReport {
    pub loaded: usize,
    pub duplicates: usize,
    pub skipped: Vec<SkippedLine>,
    pub first: Option<DateTime<Utc>>,
    pub last: Option<DateTime<Utc>>,
}

/// A parsed dataset, time-ordered, ready to feed into the store.
#[derive(Debug, Clone)]
pub struct Dataset {
    readings: Vec<Reading>,
    skipped: Vec<SkippedLine>,
}

impl Dataset {
    /// Reads a JSON-lines readings file. Malformed lines are skipped and
    /// reported by line number; a missing file is an error.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let path = path.as_ref();
        let text =
            fs::read_to_string(path).map_err(|source| IngestError::Dataset { path: path.to_path_buf(), source })?;
        Ok(Self::parse(&text))
    }

    pub fn parse(text: &str) -> Self {
        let mut readings = Vec::new();
        let mut skipped = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed = serde_json::from_str::<Reading>(line).map_err(|e| e.to_string()).and_then(|r| {
                if r.sensor_id.is_empty() {
                    Err("empty sensor_id".to_owned())
                } else if !r.pm2_5.is_finite() || r.pm2_5 < 0.0 {
                    Err(format!("pm2_5 {} is negative", r.pm2_5))
                } else {
                    Ok(r)
                }
            });
            match parsed {
                Ok(r) => readings.push(r),
                Err(message) => {
                    tracing::warn!(line = i + 1, %message, "skipping malformed dataset line");
                    skipped.push(SkippedLine { line: i + 1, message });
                }
            }
        }
        readings.sort_by_key(|r| r.timestamp);
        Self { readings, skipped }
    }

    pub fn readings(&self) -> &[Reading] {
        &self.readings
    }

    pub fn skipped(&self) -> &[SkippedLine] {
        &self.skipped
    }

    pub fn first_timestamp(&self) -> Option<DateTime<Utc>> {
        self.readings.first().map(|r| r.timestamp)
    }

    pub fn last_timestamp(&self) -> Option<DateTime<Utc>> {
        self.readings.last().map(|r| r.timestamp)
    }

    pub fn sensor_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.readings.iter().map(|r| r.sensor_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    fn report(&self) -> ReplayReport {
        ReplayReport {
            skipped: self.skipped.clone(),
            first: self.first_timestamp(),
            last: self.last_timestamp(),
            ..ReplayReport::default()
        }
    }

    fn feed(&self, reading: &Reading, data: &SharedData, now: DateTime<Utc>, report: &mut ReplayReport) {
        match data.append_batch(vec![reading.clone()], now) {
            Ok((appended, duplicates)) => {
                report.loaded += appended;
                report.duplicates += duplicates;
                let mut live = data.live.write().expect("live data lock poisoned");
                let status = live.ensure_sensor(&reading.sensor_id);
                if status.last_success.is_none_or(|t| t < reading.timestamp) {
                    status.last_success = Some(reading.timestamp);
                }
            }
            Err(e) => tracing::warn!(error = %e, "replayed reading rejected"),
        }
    }

    /// Appends every reading at once. The returned clock is parked at the
    /// newest reading so window averages line up with the data.
    pub fn load_instant(&self, data: &SharedData) -> (ManualClock, ReplayReport) {
        let end = self.last_timestamp().unwrap_or_else(Utc::now);
        let mut report = self.report();
        {
            let mut live = data.live.write().expect("live data lock poisoned");
            for id in self.sensor_ids() {
                live.ensure_sensor(&id);
            }
        }
        for r in &self.readings {
            self.feed(r, data, end, &mut report);
        }
        data.health.write().expect("health lock poisoned").replay_loaded = true;
        (ManualClock::new(end), report)
    }

    /// Appends each reading once `clock` reaches its timestamp.
    pub fn play(&self, data: &SharedData, clock: &dyn Clock, stop: &AtomicBool) -> ReplayReport {
        let mut report = self.report();
        {
            let mut live = data.live.write().expect("live data lock poisoned");
            for id in self.sensor_ids() {
                live.ensure_sensor(&id);
            }
        }
        data.health.write().expect("health lock poisoned").replay_loaded = true;
        for r in &self.readings {
            if stop.load(Ordering::Relaxed) {
                break;
            }
            clock.sleep_until(r.timestamp);
            self.feed(r, data, clock.now(), &mut report);
        }
        report
    }

    /// A clock starting at the first reading and running at `speed`.
    pub fn scaled_clock(&self, speed: f64) -> ScaledClock {
        ScaledClock::new(self.first_timestamp().unwrap_or_else(Utc::now), speed)
    }
}
