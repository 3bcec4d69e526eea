use std::sync::atomic::{AtomicBool, Ordering};

use chrono::{DateTime, Duration, Utc};
use serde::Serialize;
use url::Url;

use super::clock::Clock;
use super::fetch::Fetcher;
use super::limiter::{Permit, RateLimiter};
use super::payload::{parse_payload, RawPayload};
use super::IngestError;
use crate::state::{SensorError, SharedData};

pub const DEFAULT_BASE_URL: &str = "https://api.purpleair.com/v1/sensors";
pub const DEFAULT_POLL_INTERVAL_SECS: u64 = 600;
pub const DEFAULT_MIN_REQUEST_INTERVAL_SECS: u64 = 60;
pub const DEFAULT_REQUEST_TIMEOUT_SECS: u64 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct UpstreamConfig {
    pub base_url: Url,
    pub api_key: Option<String>,
    pub sensor_ids: Vec<String>,
    pub poll_interval_secs: u64,
    pub min_request_interval_secs: u64,
    pub request_timeout_secs: u64,
}

impl UpstreamConfig {
    pub fn new(sensor_ids: Vec<String>) -> Self {
        Self {
            base_url: Url::parse(DEFAULT_BASE_URL).expect("default URL parses"),
            api_key: None,
            sensor_ids,
            poll_interval_secs: DEFAULT_POLL_INTERVAL_SECS,
            min_request_interval_secs: DEFAULT_MIN_REQUEST_INTERVAL_SECS,
            request_timeout_secs: DEFAULT_REQUEST_TIMEOUT_SECS,
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.sensor_ids.is_empty() {
            return Err(IngestError::Config("at least one sensor id is required".into()));
        }
        if self.sensor_ids.iter().any(|s| s.trim().is_empty()) {
            return Err(IngestError::Config("sensor ids must not be empty".into()));
        }
        if self.min_request_interval_secs < 1 {
            return Err(IngestError::Config("min_request_interval must be at least 1 s".into()));
        }
        if self.poll_interval_secs < self.min_request_interval_secs {
            return Err(IngestError::Config(format!(
                "poll_interval ({} s) must be >= min_request_interval ({} s)",
                self.poll_interval_secs, self.min_request_interval_secs
            )));
        }
        if self.request_timeout_secs < 1 {
            return Err(IngestError::Config("request_timeout must be at least 1 s".into()));
        }
        Ok(())
    }

    pub fn poll_interval(&self) -> Duration {
        Duration::seconds(self.poll_interval_secs as i64)
    }

    /// Configured ids in the order they are polled.
    pub fn poll_order(&self) -> Vec<String> {
        let mut ids = self.sensor_ids.clone();
        ids.sort();
        ids.dedup();
        ids
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum FetchOutcome {
    Stored { sensor_id: String, appended: usize, duplicates: usize },
    Failed { sensor_id: String, error: String },
}

impl FetchOutcome {
    pub fn sensor_id(&self) -> &str {
        match self {
            FetchOutcome::Stored { sensor_id, .. } | FetchOutcome::Failed { sensor_id, .. } => sensor_id,
        }
    }

    pub fn is_success(&self) -> bool {
        matches!(self, FetchOutcome::Stored { .. })
    }
}

/// The live ingest loop: one rate-limited fetch per configured sensor per
/// cycle, one cycle per poll interval.
#[derive(Debug)]
pub struct Poller {
    config: UpstreamConfig,
    limiter: RateLimiter,
    permit_log: Vec<DateTime<Utc>>,
    cycles: u64,
}

impl Poller {
    pub fn new(config: UpstreamConfig) -> Result<Self, IngestError> {
        config.validate()?;
        let limiter = RateLimiter::new(Duration::seconds(config.min_request_interval_secs as i64));
        Ok(Self { config, limiter, permit_log: Vec::new(), cycles: 0 })
    }

    pub fn config(&self) -> &UpstreamConfig {
        &self.config
    }

    /// Times at which upstream requests were permitted.
    pub fn permit_log(&self) -> &[DateTime<Utc>] {
        &self.permit_log
    }

    pub fn cycles(&self) -> u64 {
        self.cycles
    }

    fn wait_for_permit(&mut self, clock: &dyn Clock) -> DateTime<Utc> {
        loop {
            let now = clock.now();
            match self.limiter.acquire(now) {
                Permit::Allow => {
                    self.permit_log.push(now);
                    return now;
                }
                Permit::WaitUntil(t) => clock.sleep_until(t),
            }
        }
    }

    /// Polls every configured sensor once, in id order. A failure for one
    /// sensor is recorded in its status and does not stop the cycle.
    pub fn poll_cycle(&mut self, clock: &dyn Clock, fetcher: &dyn Fetcher, data: &SharedData) -> Vec<FetchOutcome> {
        let mut outcomes = Vec::with_capacity(self.config.sensor_ids.len());
        for sensor_id in self.config.poll_order() {
            self.wait_for_permit(clock);
            let result = fetcher
                .fetch(&sensor_id)
                .map_err(IngestError::from)
                .and_then(|body| {
                    let raw = RawPayload { body, received_at: clock.now() };
                    parse_payload(&raw, &sensor_id).map(|p| (p, raw.received_at))
                })
                .and_then(|(parsed, received_at)| {
                    let (appended, duplicates) = data.append_batch(parsed.readings, received_at).map_err(|e| {
                        IngestError::Validation { sensor_id: sensor_id.clone(), message: e.to_string() }
                    })?;
                    Ok((parsed.location, parsed.name, appended, duplicates, received_at))
                });

            let mut live = data.live.write().expect("live data lock poisoned");
            let status = live.ensure_sensor(&sensor_id);
            match result {
                Ok((location, name, appended, duplicates, at)) => {
                    status.last_success = Some(at);
                    if location.is_some() {
                        status.location = location;
                    }
                    if let Some(name) = name {
                        status.name = name;
                    }
                    outcomes.push(FetchOutcome::Stored { sensor_id, appended, duplicates });
                }
                Err(e) => {
                    tracing::warn!(sensor = %sensor_id, error = %e, "poll failed");
                    status.last_error = Some(SensorError { at: clock.now(), message: e.to_string() });
                    outcomes.push(FetchOutcome::Failed { sensor_id, error: e.to_string() });
                }
            }
        }
        self.cycles += 1;
        let now = clock.now();
        let mut health = data.health.write().expect("health lock poisoned");
        health.cycles_completed += 1;
        if outcomes.iter().any(FetchOutcome::is_success) {
            health.successful_cycles += 1;
        }
        health.last_poll_at = Some(now);
        drop(health);
        let pruned = data.live.write().expect("live data lock poisoned").readings.prune(now);
        if pruned > 0 {
            tracing::debug!(pruned, "pruned readings past retention");
        }
        outcomes
    }

    /// Runs cycles every poll interval, starting now, until a cycle would
    /// start at or after `until` or `stop` is raised.
    pub fn run(
        &mut self,
        clock: &dyn Clock,
        fetcher: &dyn Fetcher,
        data: &SharedData,
        until: Option<DateTime<Utc>>,
        stop: &AtomicBool,
    ) {
        let mut next = clock.now();
        loop {
            if stop.load(Ordering::Relaxed) || until.is_some_and(|u| next >= u) {
                break;
            }
            clock.sleep_until(next);
            let started = clock.now();
            let outcomes = self.poll_cycle(clock, fetcher, data);
            let ok = outcomes.iter().filter(|o| o.is_success()).count();
            tracing::info!(cycle = self.cycles, ok, failed = outcomes.len() - ok, "poll cycle complete");
            next = started + self.config.poll_interval();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::clock::ManualClock;
    use crate::ingest::fetch::FetchError;
    use crate::state::ServiceMode;
    use crate::timeseries::ReadingStore;
    use chrono::TimeZone;
    use std::sync::Mutex;

    fn t0() -> DateTime<Utc> {
        Utc.timestamp_opt(1_600_000_000, 0).unwrap()
    }

    fn data() -> SharedData {
        SharedData::new(ReadingStore::new(), ServiceMode::Live, Duration::seconds(600))
    }

    /// Serves a fresh reading stamped with the clock's current time.
    struct FakeUpstream<'a> {
        clock: &'a ManualClock,
        fail: Vec<String>,
        calls: Mutex<Vec<(String, DateTime<Utc>)>>,
    }

    impl Fetcher for FakeUpstream<'_> {
        fn fetch(&self, sensor_id: &str) -> Result<Vec<u8>, FetchError> {
            let now = self.clock.now();
            self.calls.lock().unwrap().push((sensor_id.to_owned(), now));
            if self.fail.iter().any(|f| f == sensor_id) {
                return Err(FetchError::Status(503));
            }
            Ok(format!(r#"{{"sensor": {{"pm2.5": 10.0, "last_seen": {}}}}}"#, now.timestamp()).into_bytes())
        }
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    #[test]
    fn config_validation() {
        assert!(UpstreamConfig::new(vec![]).validate().is_err());
        let mut c = UpstreamConfig::new(ids(1));
        c.poll_interval_secs = 30;
        assert!(c.validate().is_err());
        c.poll_interval_secs = 60;
        assert!(c.validate().is_ok());
        c.min_request_interval_secs = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn all_succeed() {
        let clock = ManualClock::new(t0());
        let up = FakeUpstream { clock: &clock, fail: vec![], calls: Mutex::default() };
        let data = data();
        let mut p = Poller::new(UpstreamConfig::new(ids(3))).unwrap();
        let out = p.poll_cycle(&clock, &up, &data);
        assert!(out.iter().all(FetchOutcome::is_success));
        let live = data.live.read().unwrap();
        assert_eq!(live.readings.len(), 3);
        assert!(live.sensors.values().all(|s| s.last_success.is_some()));
        assert!(data.health.read().unwrap().is_ready());
    }

    #[test]
    fn middle_failure_is_isolated() {
        let clock = ManualClock::new(t0());
        let up = FakeUpstream { clock: &clock, fail: vec!["s1".into()], calls: Mutex::default() };
        let data = data();
        let mut p = Poller::new(UpstreamConfig::new(ids(3))).unwrap();
        let out = p.poll_cycle(&clock, &up, &data);
        assert_eq!(out.iter().filter(|o| o.is_success()).count(), 2);
        assert_eq!(out[1].sensor_id(), "s1");
        let live = data.live.read().unwrap();
        assert_eq!(live.readings.len(), 2);
        assert!(live.readings.readings("s1").unwrap().next().is_none());
        assert!(live.sensors["s1"].last_error.is_some());
        assert!(live.sensors["s1"].last_success.is_none());
    }

    #[test]
    fn bad_payload_leaves_store_untouched() {
        let clock = ManualClock::new(t0());
        let up =
            |_: &str| -> Result<Vec<u8>, FetchError> { Ok(br#"{"sensor": {"pm2.5": -4, "last_seen": 1}}"#.to_vec()) };
        let data = data();
        let mut p = Poller::new(UpstreamConfig::new(ids(2))).unwrap();
        let out = p.poll_cycle(&clock, &up, &data);
        assert!(out.iter().all(|o| !o.is_success()));
        assert!(data.live.read().unwrap().readings.is_empty());
        assert!(!data.health.read().unwrap().is_ready());
    }

    #[test]
    fn simulated_hour() {
        let clock = ManualClock::new(t0());
        let up = FakeUpstream { clock: &clock, fail: vec![], calls: Mutex::default() };
        let data = data();
        let mut p = Poller::new(UpstreamConfig::new(ids(8))).unwrap();
        p.run(&clock, &up, &data, Some(t0() + Duration::hours(1)), &AtomicBool::new(false));
        assert_eq!(p.cycles(), 6);
        assert_eq!(up.calls.lock().unwrap().len(), 48);
        assert!(p.permit_log().windows(2).all(|w| w[1] - w[0] >= Duration::seconds(60)));
        assert_eq!(data.live.read().unwrap().readings.len(), 48);
    }

    #[test]
    fn sensors_go_offline_after_two_missed_intervals() {
        let clock = ManualClock::new(t0());
        let up = FakeUpstream { clock: &clock, fail: vec![], calls: Mutex::default() };
        let data = data();
        let mut p = Poller::new(UpstreamConfig::new(ids(1))).unwrap();
        p.poll_cycle(&clock, &up, &data);
        let online = |at| data.live.read().unwrap().sensors["s0"].is_online(at, Duration::seconds(600));
        assert!(online(clock.now() + Duration::seconds(1200)));
        assert!(!online(clock.now() + Duration::seconds(1201)));
    }
}
