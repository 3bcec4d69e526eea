use std::sync::Mutex;
use std::time::Instant;

use chrono::{DateTime, Duration, Utc};

/// Source of "now" for everything time-dependent, so polling and replay can
/// run against virtual time.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;

    /// Blocks until `now() >= t`. Virtual clocks simply jump forward.
    fn sleep_until(&self, t: DateTime<Utc>);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }

    fn sleep_until(&self, t: DateTime<Utc>) {
        if let Ok(d) = (t - Utc::now()).to_std() {
            std::thread::sleep(d);
        }
    }
}

/// Virtual time that only moves when told to.
#[derive(Debug)]
pub struct ManualClock {
    now: Mutex<DateTime<Utc>>,
}

impl ManualClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        Self { now: Mutex::new(start) }
    }

    pub fn set(&self, t: DateTime<Utc>) {
        *self.now.lock().expect("clock lock poisoned") = t;
    }

    pub fn advance(&self, d: Duration) {
        *self.now.lock().expect("clock lock poisoned") += d;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> DateTime<Utc> {
        *self.now.lock().expect("clock lock poisoned")
    }

    fn sleep_until(&self, t: DateTime<Utc>) {
        let mut now = self.now.lock().expect("clock lock poisoned");
        if t > *now {
            *now = t;
        }
    }
}

/// Virtual time anchored at `origin` that runs `speed` times faster than
/// the wall clock.
#[derive(Debug)]
pub struct ScaledClock {
    origin: DateTime<Utc>,
    started: Instant,
    speed: f64,
}

impl ScaledClock {
    pub fn new(origin: DateTime<Utc>, speed: f64) -> Self {
        assert!(speed.is_finite() && speed > 0.0, "speed must be a positive finite factor");
        Self { origin, started: Instant::now(), speed }
    }
}

impl Clock for ScaledClock {
    fn now(&self) -> DateTime<Utc> {
        let virtual_nanos = self.started.elapsed().as_secs_f64() * self.speed * 1e9;
        self.origin + Duration::nanoseconds(virtual_nanos as i64)
    }

    fn sleep_until(&self, t: DateTime<Utc>) {
        let ahead = (t - self.now()).num_nanoseconds().unwrap_or(i64::MAX);
        if ahead > 0 {
            std::thread::sleep(std::time::Duration::from_secs_f64(ahead as f64 / 1e9 / self.speed));
        }
    }
}
