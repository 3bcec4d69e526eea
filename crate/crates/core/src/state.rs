//! State shared between the ingest loop (single writer) and API handlers
//! (many readers).

use std::collections::BTreeMap;
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Duration, Utc};
use serde::Serialize;

use crate::geo::GeoPoint;
use crate::store::Journal;
use crate::timeseries::{AppendOutcome, Reading, ReadingStore, TimeseriesError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensorError {
    pub at: DateTime<Utc>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensorStatus {
    pub sensor_id: String,
    pub name: String,
    pub location: Option<GeoPoint>,
    pub last_success: Option<DateTime<Utc>>,
    pub last_error: Option<SensorError>,
}

impl SensorStatus {
    pub fn new(sensor_id: impl Into<String>) -> Self {
        let sensor_id = sensor_id.into();
        Self { name: sensor_id.clone(), sensor_id, location: None, last_success: None, last_error: None }
    }

    /// Online while the last success is no more than two poll intervals old.
    pub fn is_online(&self, now: DateTime<Utc>, poll_interval: Duration) -> bool {
        self.last_success.is_some_and(|t| now - t <= poll_interval * 2)
    }
}

/// Readings and sensor statuses, guarded together so readers never see one
/// updated without the other.
#[derive(Debug, Default)]
pub struct LiveData {
    pub readings: ReadingStore,
    pub sensors: BTreeMap<String, SensorStatus>,
}

impl LiveData {
    pub fn new(readings: ReadingStore) -> Self {
        Self { readings, sensors: BTreeMap::new() }
    }

    /// Registers a sensor in both the status table and the reading store.
    pub fn ensure_sensor(&mut self, sensor_id: &str) -> &mut SensorStatus {
        self.readings.register_sensor(sensor_id);
        self.sensors.entry(sensor_id.to_owned()).or_insert_with(|| SensorStatus::new(sensor_id))
    }

    pub fn online_count(&self, now: DateTime<Utc>, poll_interval: Duration) -> usize {
        self.sensors.values().filter(|s| s.is_online(now, poll_interval)).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceMode {
    Live,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Health {
    pub mode: ServiceMode,
    pub cycles_completed: u64,
    pub successful_cycles: u64,
    pub last_poll_at: Option<DateTime<Utc>>,
    pub replay_loaded: bool,
}

impl Health {
    pub fn new(mode: ServiceMode) -> Self {
        Self { mode, cycles_completed: 0, successful_cycles: 0, last_poll_at: None, replay_loaded: false }
    }

    pub fn is_ready(&self) -> bool {
        match self.mode {
            ServiceMode::Live => self.successful_cycles > 0,
            ServiceMode::Replay => self.replay_loaded,
        }
    }
}

#[derive(Debug)]
pub struct SharedData {
    pub live: RwLock<LiveData>,
    pub health: RwLock<Health>,
    pub reading_journal: Mutex<Option<Journal<Reading>>>,
    pub poll_interval: Duration,
}

impl SharedData {
    pub fn new(readings: ReadingStore, mode: ServiceMode, poll_interval: Duration) -> Self {
        Self {
            live: RwLock::new(LiveData::new(readings)),
            health: RwLock::new(Health::new(mode)),
            reading_journal: Mutex::new(None),
            poll_interval,
        }
    }

    pub fn with_journal(self, journal: Journal<Reading>) -> Self {
        *self.reading_journal.lock().expect("journal lock poisoned") = Some(journal);
        self
    }

    /// Validates the whole batch before touching the store, then appends and
    /// journals the new readings. Returns (appended, duplicates).
    pub fn append_batch(&self, batch: Vec<Reading>, now: DateTime<Utc>) -> Result<(usize, usize), TimeseriesError> {
        for r in &batch {
            r.validate(now)?;
        }
        let mut fresh = Vec::new();
        let mut duplicates = 0;
        {
            let mut live = self.live.write().expect("live data lock poisoned");
            for r in batch {
                match live.readings.append(r.clone(), now)? {
                    AppendOutcome::Appended => fresh.push(r),
                    AppendOutcome::Duplicate => duplicates += 1,
                }
            }
        }
        if let Some(j) = self.reading_journal.lock().expect("journal lock poisoned").as_mut() {
            for r in &fresh {
                if let Err(e) = j.append(r) {
                    tracing::error!(error = %e, "could not journal reading");
                }
            }
        }
        Ok((fresh.len(), duplicates))
    }
}
